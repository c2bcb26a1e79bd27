#include <torch/torch.h>

#include "semcodec/errors.hpp"
#include "semcodec/losses.hpp"
#include "semcodec/signal.hpp"

namespace F = torch::nn::functional;

namespace semcodec {

namespace {

constexpr double kLeak = 0.2;

int layer_channels(int base, int i) { return base << std::min(i, 3); }

torch::Tensor as_batch(const torch::Tensor& wav) {
  return wav.dim() == 1 ? wav.unsqueeze(0) : wav;
}

}  // namespace

StftDiscriminatorImpl::StftDiscriminatorImpl(int fft_size, int channels, int layers)
    : fft_size_(fft_size) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 2;
  for (int i = 0; i < layers; ++i) {
    const int out = layer_channels(channels, i);
    convs_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, {3, 9}).stride({2, 2}).padding({1, 4})));
    in = out;
  }
  out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, {3, 3}).padding({1, 1})));
}

SubDiscriminatorOutput StftDiscriminatorImpl::forward(const torch::Tensor& wav) {
  auto spec = stft(as_batch(wav), fft_size_, fft_size_ / 4, StftPadding::center).bins;
  // [B, bins, frames] -> [B, 2, frames, bins]
  auto x = torch::stack({torch::real(spec), torch::imag(spec)}, 1).transpose(2, 3);
  SubDiscriminatorOutput out;
  for (const auto& m : *convs_) {
    x = F::leaky_relu(m->as<torch::nn::Conv2d>()->forward(x), F::LeakyReLUFuncOptions().negative_slope(kLeak));
    out.features.push_back(x);
  }
  out.logits = out_->forward(x);
  return out;
}

PeriodDiscriminatorImpl::PeriodDiscriminatorImpl(int period, int channels, int layers)
    : period_(period) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  for (int i = 0; i < layers; ++i) {
    const int out = layer_channels(channels, i);
    convs_->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(in, out, {5, 1}).stride({3, 1}).padding({2, 0})));
    in = out;
  }
  out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, 1, {3, 1}).padding({1, 0})));
}

SubDiscriminatorOutput PeriodDiscriminatorImpl::forward(const torch::Tensor& wav) {
  auto x = as_batch(wav);
  const auto n = x.size(-1);
  if (n % period_ != 0) {
    const auto pad = period_ - n % period_;
    x = F::pad(x.unsqueeze(1), F::PadFuncOptions({0, pad}).mode(torch::kReflect)).squeeze(1);
  }
  x = x.reshape({x.size(0), 1, x.size(-1) / period_, period_});
  SubDiscriminatorOutput out;
  for (const auto& m : *convs_) {
    x = F::leaky_relu(m->as<torch::nn::Conv2d>()->forward(x), F::LeakyReLUFuncOptions().negative_slope(kLeak));
    out.features.push_back(x);
  }
  out.logits = out_->forward(x);
  return out;
}

ScaleDiscriminatorImpl::ScaleDiscriminatorImpl(int pooling, int channels, int layers)
    : pooling_(pooling) {
  convs_ = register_module("convs", torch::nn::ModuleList());
  int in = 1;
  for (int i = 0; i < layers; ++i) {
    const int out = layer_channels(channels, i);
    convs_->push_back(torch::nn::Conv1d(torch::nn::Conv1dOptions(in, out, 15).stride(4).padding(7)));
    in = out;
  }
  out_ = register_module("out", torch::nn::Conv1d(torch::nn::Conv1dOptions(in, 1, 3).padding(1)));
}

SubDiscriminatorOutput ScaleDiscriminatorImpl::forward(const torch::Tensor& wav) {
  auto x = as_batch(wav).unsqueeze(1);
  for (int i = 0; i < pooling_; ++i) {
    x = F::avg_pool1d(x, F::AvgPool1dFuncOptions(4).stride(2).padding(2));
  }
  SubDiscriminatorOutput out;
  for (const auto& m : *convs_) {
    x = F::leaky_relu(m->as<torch::nn::Conv1d>()->forward(x), F::LeakyReLUFuncOptions().negative_slope(kLeak));
    out.features.push_back(x);
  }
  out.logits = out_->forward(x);
  return out;
}

DiscriminatorsImpl::DiscriminatorsImpl(const DiscriminatorConfig& cfg) {
  for (int fft : cfg.stft_ffts) {
    stft_.push_back(register_module("stft" + std::to_string(fft),
                                    StftDiscriminator(fft, cfg.channels, cfg.layers)));
  }
  for (int p : cfg.periods) {
    period_.push_back(register_module("period" + std::to_string(p),
                                      PeriodDiscriminator(p, cfg.channels, cfg.layers)));
  }
  for (int s = 0; s < cfg.num_scales; ++s) {
    scale_.push_back(register_module("scale" + std::to_string(s),
                                     ScaleDiscriminator(s, cfg.channels, cfg.layers)));
  }
}

DiscriminatorOutputs DiscriminatorsImpl::forward(const torch::Tensor& wav) {
  DiscriminatorOutputs outs;
  outs.reserve(count());
  for (auto& d : stft_) outs.push_back(d->forward(wav));
  for (auto& d : period_) outs.push_back(d->forward(wav));
  for (auto& d : scale_) outs.push_back(d->forward(wav));
  return outs;
}

}  // namespace semcodec
