#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <torch/types.h>

namespace semcodec {

// Mono audio at a fixed sample rate. Samples are expected in [-1, 1].
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }

  // Throws FormatError on a non-positive rate or non-finite samples.
  void validate() const;
};

enum class WavEncoding { pcm16, float32 };

// Reads PCM16 or float32 WAV (including WAVE_FORMAT_EXTENSIBLE). Multi-channel
// input is averaged down to mono. PCM16 is scaled by 1/32768.
Waveform load_audio(const std::filesystem::path& path);

void save_audio(const std::filesystem::path& path, const Waveform& w,
                WavEncoding encoding = WavEncoding::pcm16);

// Band-limited (windowed-sinc) resampling. Output length is
// round(len * target_rate / source_rate).
Waveform resample(const Waveform& w, int target_rate);

// [1, N] float tensor view of the samples (copied).
torch::Tensor to_tensor(const Waveform& w);
// Accepts [N] or [1, N].
Waveform from_tensor(const torch::Tensor& t, int sample_rate);

}  // namespace semcodec
