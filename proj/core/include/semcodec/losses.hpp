#pragma once

#include <map>
#include <string>
#include <vector>

#include <torch/nn.h>

#include "semcodec/config.hpp"
#include "semcodec/teacher.hpp"

namespace semcodec {

struct SubDiscriminatorOutput {
  torch::Tensor logits;
  std::vector<torch::Tensor> features;  // one per layer; time is axis 2
};
using DiscriminatorOutputs = std::vector<SubDiscriminatorOutput>;

// 2D convs over the (real, imag) STFT at one resolution.
class StftDiscriminatorImpl : public torch::nn::Module {
 public:
  StftDiscriminatorImpl(int fft_size, int channels, int layers);
  SubDiscriminatorOutput forward(const torch::Tensor& wav);

 private:
  int fft_size_;
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(StftDiscriminator);

// 2D convs over the waveform folded into [N / p, p].
class PeriodDiscriminatorImpl : public torch::nn::Module {
 public:
  PeriodDiscriminatorImpl(int period, int channels, int layers);
  SubDiscriminatorOutput forward(const torch::Tensor& wav);

 private:
  int period_;
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(PeriodDiscriminator);

// Strided 1D convs over the waveform average-pooled `pooling` times.
class ScaleDiscriminatorImpl : public torch::nn::Module {
 public:
  ScaleDiscriminatorImpl(int pooling, int channels, int layers);
  SubDiscriminatorOutput forward(const torch::Tensor& wav);

 private:
  int pooling_;
  torch::nn::ModuleList convs_{nullptr};
  torch::nn::Conv1d out_{nullptr};
};
TORCH_MODULE(ScaleDiscriminator);

// All sub-discriminators: STFT scales, then periods, then waveform scales.
class DiscriminatorsImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorsImpl(const DiscriminatorConfig& cfg);
  DiscriminatorOutputs forward(const torch::Tensor& wav);
  std::size_t count() const { return stft_.size() + period_.size() + scale_.size(); }

 private:
  std::vector<StftDiscriminator> stft_;
  std::vector<PeriodDiscriminator> period_;
  std::vector<ScaleDiscriminator> scale_;
};
TORCH_MODULE(Discriminators);

// Mean squared difference between teacher features of x and x_hat_sem after
// time alignment. x is encoded without gradient; x_hat_sem keeps its graph.
torch::Tensor distill_recon(Teacher& teacher, const torch::Tensor& x,
                            const torch::Tensor& x_hat_sem);

// Non-overlapping average pooling along time by an integer factor ([B, T, d]).
torch::Tensor average_pool_time(const torch::Tensor& feats, std::int64_t factor);

// Negative mean cosine similarity between student frames and teacher features
// pooled from teacher_rate down to pool_to. Throws ConfigError if the rate
// ratio is not an integer.
torch::Tensor distill_feature(const torch::Tensor& student, const torch::Tensor& teacher_feats,
                              double teacher_rate, double pool_to);

// (1/K) sum_k mean(max(1 - D_k(x_hat), 0))
torch::Tensor gen_hinge_loss(const DiscriminatorOutputs& fake);
// (1/K) sum_k [mean(max(1 - D_k(x), 0)) + mean(max(1 + D_k(x_hat), 0))]
torch::Tensor disc_hinge_loss(const DiscriminatorOutputs& real, const DiscriminatorOutputs& fake);

inline constexpr double kFeatureMatchingEps = 1e-8;

// (1/K) sum_k (1/L_k) sum_l mean|D_k^l(x) - D_k^l(x_hat)| / max(mean|D_k^l(x)|, eps).
// Real features are treated as constants.
torch::Tensor feature_matching_loss(const DiscriminatorOutputs& real,
                                    const DiscriminatorOutputs& fake);

struct LossParts {
  torch::Tensor time;
  torch::Tensor mel_l1;
  torch::Tensor mel_l2;
  torch::Tensor gen;
  torch::Tensor feat;
  torch::Tensor commit;
  torch::Tensor distill;

  // Component name -> value; undefined components are reported as 0.
  std::map<std::string, double> values() const;
};

// Weighted sum of the generator components. Undefined components count as 0.
// Throws NonFiniteLoss naming the first non-finite component.
torch::Tensor total_generator_loss(const LossParts& parts, const LossWeights& w);

}  // namespace semcodec
