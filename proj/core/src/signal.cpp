#include "semcodec/signal.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace F = torch::nn::functional;

namespace semcodec {

namespace {

torch::Tensor as_batch(const torch::Tensor& x) {
  if (x.dim() == 1) return x.unsqueeze(0);
  if (x.dim() != 2) throw ShapeError("expected [N] or [B, N] signal");
  return x;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

torch::Tensor hann_window(int length, torch::ScalarType dtype) {
  return torch::hann_window(length, torch::TensorOptions().dtype(dtype));
}

bool satisfies_cola(int win_length, int hop) {
  if (hop <= 0 || win_length <= 0 || hop > win_length) return false;
  auto w = hann_window(win_length, torch::kFloat64);
  auto sq = (w * w).contiguous();
  const double* p = sq.data_ptr<double>();
  double lo = 1e300, hi = -1e300;
  for (int n = 0; n < hop; ++n) {
    double acc = 0.0;
    for (int m = n; m < win_length; m += hop) acc += p[m];
    lo = std::min(lo, acc);
    hi = std::max(hi, acc);
  }
  return lo > 0.0 && (hi - lo) <= 1e-9 * hi;
}

ComplexSpectrogram stft(const torch::Tensor& x_in, int fft_size, int hop, StftPadding padding) {
  if (hop <= 0 || fft_size <= 0) throw ConfigError("fft_size and hop must be positive");
  if (hop > fft_size) throw ConfigError("hop must not exceed the window length");
  auto x = as_batch(x_in);
  const auto n = x.size(-1);

  torch::Tensor padded;
  if (padding == StftPadding::center) {
    const int pad = fft_size / 2;
    if (n <= pad) {
      throw ShapeError("signal of " + std::to_string(n) + " samples is too short for window " +
                       std::to_string(fft_size));
    }
    padded = F::pad(x.unsqueeze(1), F::PadFuncOptions({pad, pad}).mode(torch::kReflect))
                 .squeeze(1);
  } else {
    const int pad = (fft_size - hop) / 2;
    padded = F::pad(x, F::PadFuncOptions({pad, fft_size - hop - pad}));
  }
  if (padded.size(-1) < fft_size) throw ShapeError("signal shorter than one frame");

  auto frames = padded.unfold(-1, fft_size, hop);  // [B, F, win]
  auto window = hann_window(fft_size, x.scalar_type());
  auto spec = torch::fft::rfft(frames * window, fft_size, -1);  // [B, F, bins]

  ComplexSpectrogram out;
  out.bins = spec.transpose(1, 2);
  out.fft_size = fft_size;
  out.hop = hop;
  out.win_length = fft_size;
  out.padding = padding;
  out.signal_length = n;
  return out;
}

ComplexSpectrogram stft(const Waveform& w, int fft_size, int hop) {
  return stft(to_tensor(w), fft_size, hop, StftPadding::center);
}

torch::Tensor istft(const ComplexSpectrogram& s) {
  if (s.win_length != s.fft_size) throw ConfigError("istft requires win_length == fft_size");
  if (!satisfies_cola(s.win_length, s.hop)) {
    throw ConfigError("window " + std::to_string(s.win_length) + " / hop " +
                      std::to_string(s.hop) + " does not satisfy overlap-add reconstruction");
  }
  auto bins = s.bins;
  if (bins.dim() == 2) bins = bins.unsqueeze(0);
  if (bins.size(1) != s.fft_size / 2 + 1) throw ShapeError("bin count does not match fft_size");

  const auto n_frames = bins.size(2);
  const int win = s.win_length;
  auto frames = torch::fft::irfft(bins.transpose(1, 2), s.fft_size, -1);  // [B, F, win]
  auto window = hann_window(win, frames.scalar_type());
  frames = frames * window;

  const std::int64_t full = (n_frames - 1) * s.hop + win;
  auto ola = F::fold(frames.transpose(1, 2),
                     F::FoldFuncOptions({1, full}, {1, win}).stride({1, s.hop}));
  ola = ola.reshape({ola.size(0), full});

  auto wsq = (window * window).reshape({1, win, 1}).expand({1, win, n_frames});
  auto env = F::fold(wsq, F::FoldFuncOptions({1, full}, {1, win}).stride({1, s.hop}))
                 .reshape({full});
  env = torch::where(env > 1e-11, env, torch::ones_like(env));
  ola = ola / env;

  std::int64_t start = 0;
  std::int64_t length = 0;
  if (s.padding == StftPadding::center) {
    start = win / 2;
    length = s.signal_length >= 0 ? s.signal_length : (n_frames - 1) * s.hop;
  } else {
    start = (win - s.hop) / 2;
    length = s.signal_length >= 0 ? s.signal_length : n_frames * s.hop;
  }
  length = std::min(length, full - start);
  return ola.narrow(1, start, length);
}

torch::Tensor mel_filterbank(int n_mels, int fft_size, int sample_rate, double f_min,
                             double f_max) {
  if (f_max <= 0.0) f_max = sample_rate / 2.0;
  const int n_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(f_min), mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }

  auto fb = torch::zeros({n_mels, n_bins}, torch::kFloat64);
  auto acc = fb.accessor<double, 2>();
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    double peak = 0.0;
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      const double v = std::max(0.0, std::min(up, down));
      acc[m][k] = v;
      peak = std::max(peak, v);
    }
    if (peak > 0.0) {
      for (int k = 0; k < n_bins; ++k) acc[m][k] /= peak;
    }
  }
  return fb;
}

MelSpectrogram mel_spectrogram(const torch::Tensor& x, int n_mels, int window, int hop,
                               int sample_rate) {
  if (window < hop) throw ConfigError("mel window must not be shorter than hop");
  auto spec = stft(x, window, hop, StftPadding::center);
  auto mag = torch::abs(spec.bins);  // [B, bins, F]
  auto fb = mel_filterbank(n_mels, window, sample_rate).to(mag.scalar_type());
  auto mel = torch::matmul(fb, mag);
  MelSpectrogram out;
  out.bands = torch::log(torch::clamp_min(mel, 1e-5));
  out.n_mels = n_mels;
  out.window = window;
  out.hop = hop;
  return out;
}

MelSpectrogram mel_spectrogram(const Waveform& w, int n_mels, int window, int hop) {
  return mel_spectrogram(to_tensor(w), n_mels, window, hop, w.sample_rate);
}

std::pair<torch::Tensor, torch::Tensor> truncate_pair(const torch::Tensor& a,
                                                      const torch::Tensor& b) {
  const auto n = std::min(a.size(-1), b.size(-1));
  if (n <= 0) throw ShapeError("signals have no overlapping samples");
  return {a.narrow(-1, 0, n), b.narrow(-1, 0, n)};
}

torch::Tensor time_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
  auto [a, b] = truncate_pair(x, x_hat);
  return (a - b).abs().mean();
}

double time_loss(const Waveform& x, const Waveform& x_hat) {
  return time_loss(to_tensor(x).to(torch::kFloat64), to_tensor(x_hat).to(torch::kFloat64))
      .item<double>();
}

MelLoss multiscale_mel_loss(const torch::Tensor& x_in, const torch::Tensor& x_hat_in,
                            int sample_rate) {
  auto [x, x_hat] = truncate_pair(as_batch(x_in), as_batch(x_hat_in));
  const int largest = 1 << kMelLossMaxExp;
  if (x.size(-1) <= largest / 2) {
    throw ShapeError("signal of " + std::to_string(x.size(-1)) +
                     " samples is too short for the largest mel window (" +
                     std::to_string(largest) + ")");
  }
  MelLoss loss;
  loss.l1 = torch::zeros({}, x.options());
  loss.l2 = torch::zeros({}, x.options());
  for (int e = kMelLossMinExp; e <= kMelLossMaxExp; ++e) {
    const int window = 1 << e;
    const int hop = 1 << (e - 2);
    auto a = mel_spectrogram(x, kMelLossBands, window, hop, sample_rate).bands;
    auto b = mel_spectrogram(x_hat, kMelLossBands, window, hop, sample_rate).bands;
    auto diff = a - b;
    loss.l1 = loss.l1 + diff.abs().mean();
    loss.l2 = loss.l2 + diff.pow(2).mean();
  }
  return loss;
}

double multiscale_mel_loss(const Waveform& x, const Waveform& x_hat) {
  auto loss = multiscale_mel_loss(to_tensor(x).to(torch::kFloat64),
                                  to_tensor(x_hat).to(torch::kFloat64), x.sample_rate);
  return loss.total().item<double>();
}

}  // namespace semcodec
