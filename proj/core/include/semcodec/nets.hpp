#pragma once

#include <cstdint>
#include <vector>

#include <torch/nn.h>

#include "semcodec/config.hpp"

namespace semcodec {

// Conv1d with weight normalization: weight = g * v / ||v|| (norm per output
// channel). Padding is explicit and may be asymmetric.
class WeightNormConv1dImpl : public torch::nn::Module {
 public:
  WeightNormConv1dImpl(int in_channels, int out_channels, int kernel, int stride = 1,
                       int dilation = 1, int pad_left = -1, int pad_right = -1, int groups = 1);
  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor weight() const;

 private:
  torch::Tensor v_, g_, bias_;
  int stride_, dilation_, pad_left_, pad_right_, groups_;
};
TORCH_MODULE(WeightNormConv1d);

// ELU -> conv(k) halving channels -> ELU -> conv(1) restoring them, plus skip.
class ResidualUnitImpl : public torch::nn::Module {
 public:
  ResidualUnitImpl(int channels, int kernel, int dilation = 1);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  WeightNormConv1d conv1_{nullptr}, conv2_{nullptr};
};
TORCH_MODULE(ResidualUnit);

// Stack of post-norm transformer layers over [B, T, C].
class TransformerStackImpl : public torch::nn::Module {
 public:
  TransformerStackImpl(int dim, int heads, int ffn, int layers);
  torch::Tensor forward(const torch::Tensor& x);
  int layers() const { return static_cast<int>(layers_.size()); }

 private:
  std::vector<torch::nn::TransformerEncoderLayer> layers_;
};
TORCH_MODULE(TransformerStack);

// Conv front-end (residual units + strided convs, channels doubling), a
// stride-2 downsampling conv, the transformer bottleneck and a projection to
// the code dimension. Input [B, N] -> [B, floor(N / hop), code_dim].
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const EncoderConfig& cfg);
  torch::Tensor forward(const torch::Tensor& wav);

  std::int64_t hop() const { return hop_; }
  std::int64_t frames_for(std::int64_t samples) const { return samples / hop_; }

 private:
  torch::nn::Sequential frontend_{nullptr};
  WeightNormConv1d downsample_{nullptr};
  TransformerStack transformer_{nullptr};
  torch::nn::Linear project_{nullptr};
  std::int64_t hop_;
};
TORCH_MODULE(Encoder);

class ConvNeXtBlockImpl : public torch::nn::Module {
 public:
  ConvNeXtBlockImpl(int dim, int intermediate, double layer_scale);
  torch::Tensor forward(const torch::Tensor& x);  // [B, C, T]

 private:
  torch::nn::Conv1d dwconv_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear pw1_{nullptr}, pw2_{nullptr};
  torch::Tensor gamma_;
};
TORCH_MODULE(ConvNeXtBlock);

struct VocosShape {
  int code_dim = 256;
  int hidden = 768;
  int intermediate = 2034;
  int layers = 12;
  int fft_size = 1280;
  int hop = 320;
  int upsample_factor = 2;
};

// Learnable transposed-conv upsampling in time, ConvNeXt backbone, and an iSTFT
// head predicting log-magnitude and a unit-modulus (cos, sin) phase per bin.
// [B, T, code_dim] -> [B, T * upsample_factor * hop].
class VocosDecoderImpl : public torch::nn::Module {
 public:
  explicit VocosDecoderImpl(const VocosShape& shape);
  torch::Tensor forward(const torch::Tensor& z);
  const VocosShape& shape() const { return shape_; }

 private:
  VocosShape shape_;
  torch::nn::ConvTranspose1d upsample_{nullptr};
  torch::nn::Conv1d embed_{nullptr};
  torch::nn::LayerNorm norm_in_{nullptr}, norm_out_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(VocosDecoder);

// Transposed-convolution decoder mirroring the encoder strides.
// [B, T, code_dim] -> [B, T * product(strides) * transformer_downsample].
class MirroredDecoderImpl : public torch::nn::Module {
 public:
  explicit MirroredDecoderImpl(const EncoderConfig& cfg);
  torch::Tensor forward(const torch::Tensor& z);

 private:
  torch::nn::Linear project_{nullptr};
  TransformerStack transformer_{nullptr};
  torch::nn::ConvTranspose1d upsample_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  WeightNormConv1d conv_in_{nullptr}, conv_out_{nullptr};
  std::vector<int> strides_;  // decoding order
  int downsample_;
};
TORCH_MODULE(MirroredDecoder);

VocosShape main_decoder_shape(const RunConfig& cfg);
VocosShape aux_decoder_shape(const RunConfig& cfg);

std::int64_t parameter_count(const torch::nn::Module& m);

}  // namespace semcodec
