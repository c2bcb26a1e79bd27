#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace semcodec {

struct EncoderConfig {
  int base_channels = 32;            // doubled after every strided block
  std::vector<int> strides{8, 5, 4, 2};
  int residual_kernel = 3;
  int dim = 512;                     // front-end output / transformer width
  int transformer_downsample = 2;
  int transformer_layers = 8;
  int transformer_heads = 8;
  int transformer_ffn = 2048;
  int code_dim = 256;                // quantizer dimension
};

struct DecoderConfig {
  std::string type = "vocos";        // vocos | mirrored
  int hidden = 768;
  int intermediate = 2034;
  int layers = 12;
  int fft_size = 1280;
  int hop = 320;
  int upsample_factor = 2;
  int aux_hidden = 384;
  int aux_intermediate = 1024;
  int aux_layers = 1;
};

struct QuantizerConfig {
  int codebook_size = 1024;
  int num_acoustic = 7;
  double ema_decay = 0.99;
  int kmeans_iters = 10;
  int dead_code_window_steps = 0;    // 0: one pass over the manifest
  double dead_code_share = 1e-6;
  int dead_code_windows = 2;
};

struct TeacherConfig {
  std::string backend = "standin";   // standin | torchscript
  std::string weights;               // torchscript module path (or optional stand-in override)
  double frame_rate = 50.0;
  int dim = 384;
  std::vector<int> channels{64, 128, 256, 384};
  std::vector<int> strides{5, 4, 4, 4};
  int transformer_layers = 2;
  int transformer_heads = 6;
  int transformer_ffn = 1536;
  std::uint64_t seed = 1337;
  bool normalize = false;            // layer-normalize features before the distillation MSE
};

struct DiscriminatorConfig {
  std::vector<int> stft_ffts{2048, 1024, 512, 256, 128};
  std::vector<int> periods{2, 3, 5, 7, 11};
  int num_scales = 3;
  int channels = 32;
  int layers = 4;
};

struct LossWeights {
  double time = 500.0;
  double mel_l1 = 45.0;
  double mel_l2 = 1.0;
  double gen = 1.0;
  double feat = 1.0;
  double commit = 10.0;
  double distill = 100.0;
};

// Ablation switches.
struct ArmConfig {
  std::string distill = "recon";     // recon | feature | none
  std::string aux = "decoupled";     // decoupled | shared | frozen
  std::string encoder = "dual";      // dual | single
};

struct TrainConfig {
  std::string manifest;
  std::string out_dir = "runs/default";
  double segment_seconds = 6.0;
  int batch_size = 8;
  int accum_steps = 16;
  double lr = 2e-4;
  double disc_lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double weight_decay = 0.0;
  double grad_clip = 0.0;            // 0 disables clipping
  int epochs = 20;
  std::int64_t max_steps = 0;        // 0: run all epochs
  int checkpoint_every = 0;          // 0: only at the end
  int log_every = 1;
};

struct RunConfig {
  std::string preset = "25hz";
  std::uint64_t seed = 0;
  int threads = 1;
  int sample_rate = 16000;
  EncoderConfig encoder;
  DecoderConfig decoder;
  QuantizerConfig quantizer;
  TeacherConfig teacher;
  DiscriminatorConfig discriminator;
  LossWeights weights;
  ArmConfig arms;
  TrainConfig train;
};

// Derived timing of a configuration. frame_rate is exact whenever the
// denominator is a power of two, which validation enforces.
struct FrameRateConfig {
  int sample_rate = 16000;
  std::vector<int> conv_strides;
  int transformer_downsample = 2;
  double frame_rate = 0.0;
  int samples_per_frame = 0;
  int upsample_factor = 0;
  int istft_fft = 1280;
  int istft_hop = 320;
};

// sample_rate / (product(strides) * transformer_downsample). Throws ConfigError
// when the result is not exactly representable (denominator not a power of two).
double derive_frame_rate(const EncoderConfig& cfg, int sample_rate);

FrameRateConfig frame_rate_config(const RunConfig& cfg);

// Segment length in samples; an exact multiple of samples_per_frame once validated.
std::int64_t segment_samples(const RunConfig& cfg);

// Every violated invariant, empty when valid.
std::vector<std::string> validate(const RunConfig& cfg);
// Throws ConfigError listing every violation.
void ensure_valid(const RunConfig& cfg);

// Known presets: 25hz, 12.5hz, 6.25hz (reference scale) and toy-25hz,
// toy-12.5hz, toy-6.25hz (desk scale, same code paths).
std::vector<std::string> preset_names();
nlohmann::json preset_json(const std::string& name);

// Resolves {"preset": ..., overrides...} by merge-patching the overrides onto the preset.
RunConfig resolve_config(const nlohmann::json& layered);
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
// "a.b.c=value" with value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig from_json(const nlohmann::json& j);

// SHA-256 (hex) over the canonical resolved JSON.
std::string config_digest(const RunConfig& cfg);

}  // namespace semcodec
