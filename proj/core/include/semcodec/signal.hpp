#pragma once

#include <string>
#include <utility>

#include <torch/types.h>

#include "semcodec/audio.hpp"

namespace semcodec {

// How frames are anchored in time.
//  center: reflect-pad win/2 on both sides; frames == 1 + len / hop.
//  same:   zero-pad (win - hop) / 2; frames == len / hop, istft returns frames * hop.
enum class StftPadding { center, same };

struct ComplexSpectrogram {
  torch::Tensor bins;  // complex [B, fft_size / 2 + 1, frames]
  int fft_size = 0;
  int hop = 0;
  int win_length = 0;
  std::string window = "hann";
  StftPadding padding = StftPadding::center;
  std::int64_t signal_length = -1;  // source length when known

  std::int64_t frames() const { return bins.size(-1); }
};

// Periodic Hann window.
torch::Tensor hann_window(int length, torch::ScalarType dtype = torch::kFloat32);

// True when the squared window overlap-adds to a constant at this hop, which
// is what windowed overlap-add synthesis needs for exact inversion.
bool satisfies_cola(int win_length, int hop);

// x: [N] or [B, N]. Differentiable.
ComplexSpectrogram stft(const torch::Tensor& x, int fft_size, int hop,
                        StftPadding padding = StftPadding::center);
ComplexSpectrogram stft(const Waveform& w, int fft_size, int hop);

// Overlap-add inverse. Throws ConfigError when (win_length, hop) fails COLA.
// Returns [B, N]; N == signal_length when known, otherwise derived from the padding.
torch::Tensor istft(const ComplexSpectrogram& s);

// HTK-scale triangular filters, [n_mels, fft_size / 2 + 1]. Each non-empty
// filter is normalized to unit peak; filters that cover no FFT bin are all zero.
torch::Tensor mel_filterbank(int n_mels, int fft_size, int sample_rate, double f_min = 0.0,
                             double f_max = -1.0);

struct MelSpectrogram {
  torch::Tensor bands;  // [B, n_mels, frames], log-compressed
  int n_mels = 0;
  int window = 0;
  int hop = 0;
};

// Log(clamp(|mel|, 1e-5)) of the Hann-windowed magnitude STFT (fft == window).
MelSpectrogram mel_spectrogram(const torch::Tensor& x, int n_mels, int window, int hop,
                               int sample_rate = 16000);
MelSpectrogram mel_spectrogram(const Waveform& w, int n_mels, int window, int hop);

// Truncates both signals to the shorter length along the last axis.
std::pair<torch::Tensor, torch::Tensor> truncate_pair(const torch::Tensor& a,
                                                      const torch::Tensor& b);

// Mean absolute difference after truncation.
torch::Tensor time_loss(const torch::Tensor& x, const torch::Tensor& x_hat);
double time_loss(const Waveform& x, const Waveform& x_hat);

struct MelLoss {
  torch::Tensor l1;  // sum over scales of mean |M(x) - M(x_hat)|
  torch::Tensor l2;  // sum over scales of mean (M(x) - M(x_hat))^2
  torch::Tensor total() const { return l1 + l2; }
};

inline constexpr int kMelLossBands = 64;
inline constexpr int kMelLossMinExp = 5;
inline constexpr int kMelLossMaxExp = 11;

// 64-band mels at window 2^i, hop 2^(i-2), i in [5, 11].
MelLoss multiscale_mel_loss(const torch::Tensor& x, const torch::Tensor& x_hat,
                            int sample_rate = 16000);
double multiscale_mel_loss(const Waveform& x, const Waveform& x_hat);

}  // namespace semcodec
