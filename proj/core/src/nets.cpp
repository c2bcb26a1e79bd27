#include "semcodec/nets.hpp"

#include <cmath>

#include <torch/torch.h>

#include "semcodec/errors.hpp"
#include "semcodec/signal.hpp"

namespace F = torch::nn::functional;

namespace semcodec {

WeightNormConv1dImpl::WeightNormConv1dImpl(int in_channels, int out_channels, int kernel,
                                           int stride, int dilation, int pad_left, int pad_right,
                                           int groups)
    : stride_(stride), dilation_(dilation), groups_(groups) {
  const int total = dilation * (kernel - 1);
  pad_left_ = pad_left >= 0 ? pad_left : total / 2;
  pad_right_ = pad_right >= 0 ? pad_right : total - total / 2;
  // Borrow the default Conv1d initialization.
  torch::nn::Conv1d init(torch::nn::Conv1dOptions(in_channels, out_channels, kernel).groups(groups));
  auto w = init->weight.detach().clone();
  auto g = w.pow(2).sum({1, 2}, true).sqrt();
  v_ = register_parameter("v", w);
  g_ = register_parameter("g", g);
  // Zero bias: with default bias init the deep conv stack is dominated by constants.
  bias_ = register_parameter("bias", torch::zeros_like(init->bias));
}

torch::Tensor WeightNormConv1dImpl::weight() const {
  return g_ * v_ / v_.pow(2).sum({1, 2}, true).sqrt().clamp_min(1e-12);
}

torch::Tensor WeightNormConv1dImpl::forward(const torch::Tensor& x) {
  auto padded = (pad_left_ || pad_right_) ? F::pad(x, F::PadFuncOptions({pad_left_, pad_right_}))
                                          : x;
  return F::conv1d(padded, weight(),
                   F::Conv1dFuncOptions().bias(bias_).stride(stride_).dilation(dilation_).groups(
                       groups_));
}

ResidualUnitImpl::ResidualUnitImpl(int channels, int kernel, int dilation) {
  const int hidden = std::max(1, channels / 2);
  conv1_ = register_module("conv1", WeightNormConv1d(channels, hidden, kernel, 1, dilation));
  conv2_ = register_module("conv2", WeightNormConv1d(hidden, channels, 1));
}

torch::Tensor ResidualUnitImpl::forward(const torch::Tensor& x) {
  auto y = conv1_->forward(F::elu(x));
  y = conv2_->forward(F::elu(y));
  return x + y;
}

TransformerStackImpl::TransformerStackImpl(int dim, int heads, int ffn, int layers) {
  for (int i = 0; i < layers; ++i) {
    auto layer = torch::nn::TransformerEncoderLayer(
        torch::nn::TransformerEncoderLayerOptions(dim, heads)
            .dim_feedforward(ffn)
            .dropout(0.0)
            .activation(torch::kGELU));
    layers_.push_back(register_module("layer" + std::to_string(i), layer));
  }
}

torch::Tensor TransformerStackImpl::forward(const torch::Tensor& x) {
  if (layers_.empty()) return x;
  auto y = x.transpose(0, 1);  // [T, B, C]
  for (auto& layer : layers_) y = layer->forward(y);
  return y.transpose(0, 1);
}

EncoderImpl::EncoderImpl(const EncoderConfig& cfg) {
  torch::nn::Sequential front;
  int ch = cfg.base_channels;
  front->push_back(WeightNormConv1d(1, ch, 7));
  for (int s : cfg.strides) {
    front->push_back(ResidualUnit(ch, cfg.residual_kernel));
    front->push_back(torch::nn::ELU());
    // kernel 2s with s samples of padding keeps floor(N / s) output frames.
    front->push_back(WeightNormConv1d(ch, ch * 2, 2 * s, s, 1, (s + 1) / 2, s / 2));
    ch *= 2;
  }
  front->push_back(torch::nn::ELU());
  front->push_back(WeightNormConv1d(ch, cfg.dim, 3));
  frontend_ = register_module("frontend", front);

  const int ds = cfg.transformer_downsample;
  downsample_ = register_module(
      "downsample", WeightNormConv1d(cfg.dim, cfg.dim, 2 * ds, ds, 1, (ds + 1) / 2, ds / 2));
  transformer_ = register_module(
      "transformer", TransformerStack(cfg.dim, cfg.transformer_heads, cfg.transformer_ffn,
                                      cfg.transformer_layers));
  project_ = register_module("project", torch::nn::Linear(cfg.dim, cfg.code_dim));

  hop_ = ds;
  for (int s : cfg.strides) hop_ *= s;
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& wav) {
  auto x = wav.dim() == 1 ? wav.unsqueeze(0) : wav;
  if (x.size(-1) < hop_) {
    throw ShapeError("input of " + std::to_string(x.size(-1)) +
                     " samples is shorter than one frame (" + std::to_string(hop_) + ")");
  }
  auto h = frontend_->forward(x.unsqueeze(1));
  h = downsample_->forward(h);            // [B, dim, T]
  h = transformer_->forward(h.transpose(1, 2));
  return project_->forward(h);            // [B, T, code_dim]
}

ConvNeXtBlockImpl::ConvNeXtBlockImpl(int dim, int intermediate, double layer_scale) {
  dwconv_ = register_module(
      "dwconv", torch::nn::Conv1d(torch::nn::Conv1dOptions(dim, dim, 7).padding(3).groups(dim)));
  norm_ = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim}).eps(1e-6)));
  pw1_ = register_module("pw1", torch::nn::Linear(dim, intermediate));
  pw2_ = register_module("pw2", torch::nn::Linear(intermediate, dim));
  gamma_ = register_parameter("gamma", torch::full({dim}, layer_scale));
}

torch::Tensor ConvNeXtBlockImpl::forward(const torch::Tensor& x) {
  auto y = dwconv_->forward(x).transpose(1, 2);
  y = pw2_->forward(F::gelu(pw1_->forward(norm_->forward(y))));
  return x + (gamma_ * y).transpose(1, 2);
}

VocosDecoderImpl::VocosDecoderImpl(const VocosShape& shape) : shape_(shape) {
  const int u = shape.upsample_factor;
  if (u > 1) {
    upsample_ = register_module(
        "upsample", torch::nn::ConvTranspose1d(
                        torch::nn::ConvTranspose1dOptions(shape.code_dim, shape.code_dim, 2 * u)
                            .stride(u)
                            .padding(u / 2)));
  }
  embed_ = register_module(
      "embed",
      torch::nn::Conv1d(torch::nn::Conv1dOptions(shape.code_dim, shape.hidden, 7).padding(3)));
  norm_in_ = register_module(
      "norm_in", torch::nn::LayerNorm(torch::nn::LayerNormOptions({shape.hidden}).eps(1e-6)));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < shape.layers; ++i) {
    blocks_->push_back(ConvNeXtBlock(shape.hidden, shape.intermediate, 1.0 / shape.layers));
  }
  norm_out_ = register_module(
      "norm_out", torch::nn::LayerNorm(torch::nn::LayerNormOptions({shape.hidden}).eps(1e-6)));
  const int bins = shape.fft_size / 2 + 1;
  head_ = register_module("head", torch::nn::Linear(shape.hidden, 3 * bins));
}

torch::Tensor VocosDecoderImpl::forward(const torch::Tensor& z) {
  auto x = z.dim() == 2 ? z.unsqueeze(0) : z;
  if (x.size(1) == 0) throw ShapeError("cannot decode an empty frame sequence");
  x = x.transpose(1, 2);  // [B, C, T]
  if (upsample_) x = upsample_->forward(x);
  x = embed_->forward(x);
  x = norm_in_->forward(x.transpose(1, 2)).transpose(1, 2);
  for (const auto& block : *blocks_) x = block->as<ConvNeXtBlock>()->forward(x);
  x = norm_out_->forward(x.transpose(1, 2));  // [B, T', hidden]

  const int bins = shape_.fft_size / 2 + 1;
  auto out = head_->forward(x);
  auto log_mag = out.narrow(-1, 0, bins);
  auto re = out.narrow(-1, bins, bins);
  auto im = out.narrow(-1, 2 * bins, bins);
  auto mag = torch::exp(log_mag).clamp_max(1e2);
  auto norm = torch::sqrt(re * re + im * im + 1e-8);
  auto spec = torch::complex(mag * re / norm, mag * im / norm).transpose(1, 2);

  ComplexSpectrogram s;
  s.bins = spec;
  s.fft_size = shape_.fft_size;
  s.hop = shape_.hop;
  s.win_length = shape_.fft_size;
  s.padding = StftPadding::same;
  s.signal_length = spec.size(-1) * shape_.hop;
  return istft(s);
}

MirroredDecoderImpl::MirroredDecoderImpl(const EncoderConfig& cfg)
    : strides_(cfg.strides.rbegin(), cfg.strides.rend()), downsample_(cfg.transformer_downsample) {
  project_ = register_module("project", torch::nn::Linear(cfg.code_dim, cfg.dim));
  transformer_ = register_module(
      "transformer", TransformerStack(cfg.dim, cfg.transformer_heads, cfg.transformer_ffn,
                                      cfg.transformer_layers));
  upsample_ = register_module(
      "upsample", torch::nn::ConvTranspose1d(
                      torch::nn::ConvTranspose1dOptions(cfg.dim, cfg.dim, 2 * downsample_)
                          .stride(downsample_)));
  int ch = cfg.base_channels << cfg.strides.size();
  conv_in_ = register_module("conv_in", WeightNormConv1d(cfg.dim, ch, 7));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int s : strides_) {
    blocks_->push_back(torch::nn::ConvTranspose1d(
        torch::nn::ConvTranspose1dOptions(ch, ch / 2, 2 * s).stride(s)));
    blocks_->push_back(ResidualUnit(ch / 2, cfg.residual_kernel));
    ch /= 2;
  }
  conv_out_ = register_module("conv_out", WeightNormConv1d(ch, 1, 7));
}

namespace {

// A stride-s, kernel-2s transposed conv yields L * s + s samples; drop the overhang.
torch::Tensor trim_upsampled(const torch::Tensor& y, std::int64_t frames, int stride) {
  return y.narrow(-1, stride / 2, frames * stride);
}

}  // namespace

torch::Tensor MirroredDecoderImpl::forward(const torch::Tensor& z) {
  auto x = z.dim() == 2 ? z.unsqueeze(0) : z;
  if (x.size(1) == 0) throw ShapeError("cannot decode an empty frame sequence");
  const auto frames = x.size(1);
  x = transformer_->forward(project_->forward(x)).transpose(1, 2);
  x = trim_upsampled(upsample_->forward(x), frames, downsample_);
  x = conv_in_->forward(x);
  std::size_t i = 0;
  for (int s : strides_) {
    const auto len = x.size(-1);
    auto deconv = blocks_[i++]->as<torch::nn::ConvTranspose1d>();
    auto res = blocks_[i++]->as<ResidualUnit>();
    x = trim_upsampled(deconv->forward(F::elu(x)), len, s);
    x = res->forward(x);
  }
  return conv_out_->forward(F::elu(x)).squeeze(1);
}

VocosShape main_decoder_shape(const RunConfig& cfg) {
  VocosShape s;
  s.code_dim = cfg.encoder.code_dim;
  s.hidden = cfg.decoder.hidden;
  s.intermediate = cfg.decoder.intermediate;
  s.layers = cfg.decoder.layers;
  s.fft_size = cfg.decoder.fft_size;
  s.hop = cfg.decoder.hop;
  s.upsample_factor = cfg.decoder.upsample_factor;
  return s;
}

VocosShape aux_decoder_shape(const RunConfig& cfg) {
  auto s = main_decoder_shape(cfg);
  s.hidden = cfg.decoder.aux_hidden;
  s.intermediate = cfg.decoder.aux_intermediate;
  s.layers = cfg.decoder.aux_layers;
  return s;
}

std::int64_t parameter_count(const torch::nn::Module& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

}  // namespace semcodec
