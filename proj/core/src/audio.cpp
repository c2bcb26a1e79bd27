#include "semcodec/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace semcodec {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

void Waveform::validate() const {
  if (sample_rate <= 0) throw FormatError("sample_rate must be positive");
  for (float s : samples) {
    if (!std::isfinite(s)) throw FormatError("waveform contains non-finite samples");
  }
}

Waveform load_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file: " + path.string());
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(len, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("truncated fmt chunk: " + path.string());
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && avail >= 40) {
        // First two bytes of the SubFormat GUID carry the actual format tag.
        format = read_u16(chunk + 8 + 24);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos = body + len + (len & 1u);
  }

  if (channels == 0 || rate == 0) throw FormatError("missing fmt chunk: " + path.string());
  if (data == nullptr) throw FormatError("missing data chunk: " + path.string());

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits): " + path.string());
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_len / (bytes_per_sample * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<std::int16_t>(read_u16(p)) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, sizeof(float));
        acc += v;
      }
    }
    w.samples[i] = static_cast<float>(acc / channels);
  }
  return w;
}

void save_audio(const std::filesystem::path& path, const Waveform& w, WavEncoding encoding) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write audio file: " + path.string());

  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t format = encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * (bits / 8));

  out.write("RIFF", 4);
  put_u32(out, 36 + data_len);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  out.write("data", 4);
  put_u32(out, data_len);
  for (float s : w.samples) {
    if (encoding == WavEncoding::pcm16) {
      const double scaled = std::clamp(std::round(static_cast<double>(s) * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(scaled)));
    } else {
      std::uint32_t raw;
      std::memcpy(&raw, &s, sizeof(float));
      put_u32(out, raw);
    }
  }
  if (!out) throw IoError("short write: " + path.string());
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw FormatError("target_rate must be positive");
  if (target_rate == w.sample_rate) return w;

  const double ratio = static_cast<double>(target_rate) / w.sample_rate;
  const auto out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(w.samples.size()) * ratio));
  // Low-pass at the lower of the two Nyquist frequencies.
  const double cutoff = std::min(1.0, ratio) * 0.97;
  constexpr int kZeros = 16;
  const double half_width = kZeros / cutoff;

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const auto n_in = static_cast<std::ptrdiff_t>(w.samples.size());
  for (std::size_t i = 0; i < out_len; ++i) {
    const double t = static_cast<double>(i) / ratio;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil(t - half_width));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor(t + half_width));
    double acc = 0.0;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(lo, 0); j <= std::min(hi, n_in - 1); ++j) {
      const double x = static_cast<double>(j) - t;
      // Hann-windowed sinc kernel.
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half_width);
      acc += w.samples[static_cast<std::size_t>(j)] * cutoff * sinc(cutoff * x) * win;
    }
    out.samples[i] = static_cast<float>(acc);
  }
  return out;
}

torch::Tensor to_tensor(const Waveform& w) {
  return torch::from_blob(const_cast<float*>(w.samples.data()),
                          {1, static_cast<std::int64_t>(w.samples.size())}, torch::kFloat32)
      .clone();
}

Waveform from_tensor(const torch::Tensor& t, int sample_rate) {
  auto flat = t.detach().to(torch::kCPU, torch::kFloat32).contiguous().reshape({-1});
  if (t.dim() > 2 || (t.dim() == 2 && t.size(0) != 1)) {
    throw FormatError("from_tensor expects a single mono signal");
  }
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(flat.data_ptr<float>(), flat.data_ptr<float>() + flat.numel());
  return w;
}

}  // namespace semcodec
