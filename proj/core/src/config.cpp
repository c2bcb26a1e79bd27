#include "semcodec/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "semcodec/digest.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/quantize.hpp"
#include "semcodec/signal.hpp"

namespace semcodec {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderConfig, base_channels, strides,
                                                residual_kernel, dim, transformer_downsample,
                                                transformer_layers, transformer_heads,
                                                transformer_ffn, code_dim)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DecoderConfig, type, hidden, intermediate, layers,
                                                fft_size, hop, upsample_factor, aux_hidden,
                                                aux_intermediate, aux_layers)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(QuantizerConfig, codebook_size, num_acoustic,
                                                ema_decay, kmeans_iters, dead_code_window_steps,
                                                dead_code_share, dead_code_windows)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TeacherConfig, backend, weights, frame_rate, dim,
                                                channels, strides, transformer_layers,
                                                transformer_heads, transformer_ffn, seed,
                                                normalize)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiscriminatorConfig, stft_ffts, periods,
                                                num_scales, channels, layers)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, time, mel_l1, mel_l2, gen, feat,
                                                commit, distill)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ArmConfig, distill, aux, encoder)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, manifest, out_dir, segment_seconds,
                                                batch_size, accum_steps, lr, disc_lr, beta1,
                                                beta2, weight_decay, grad_clip, epochs,
                                                max_steps, checkpoint_every, log_every)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, preset, seed, threads, sample_rate,
                                                encoder, decoder, quantizer, teacher,
                                                discriminator, weights, arms, train)

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error([&] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  - " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

namespace {

bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

struct Rational {
  std::int64_t num;
  std::int64_t den;
};

Rational reduced(std::int64_t num, std::int64_t den) {
  const auto g = std::gcd(num, den);
  return {num / g, den / g};
}

std::int64_t stride_product(const std::vector<int>& strides) {
  std::int64_t p = 1;
  for (int s : strides) p *= s;
  return p;
}

}  // namespace

double derive_frame_rate(const EncoderConfig& cfg, int sample_rate) {
  if (cfg.strides.empty()) throw ConfigError("encoder strides must not be empty");
  for (int s : cfg.strides) {
    if (s <= 0) throw ConfigError("encoder strides must be positive");
  }
  if (cfg.transformer_downsample <= 0) throw ConfigError("transformer_downsample must be positive");
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  const auto hop = stride_product(cfg.strides) * cfg.transformer_downsample;
  const auto r = reduced(sample_rate, hop);
  if (!is_power_of_two(r.den)) {
    throw ConfigError("frame rate " + std::to_string(sample_rate) + "/" + std::to_string(hop) +
                      " Hz is not exactly representable");
  }
  return static_cast<double>(r.num) / static_cast<double>(r.den);
}

FrameRateConfig frame_rate_config(const RunConfig& cfg) {
  FrameRateConfig f;
  f.sample_rate = cfg.sample_rate;
  f.conv_strides = cfg.encoder.strides;
  f.transformer_downsample = cfg.encoder.transformer_downsample;
  f.frame_rate = derive_frame_rate(cfg.encoder, cfg.sample_rate);
  f.samples_per_frame =
      static_cast<int>(stride_product(cfg.encoder.strides) * cfg.encoder.transformer_downsample);
  f.upsample_factor = cfg.decoder.upsample_factor;
  f.istft_fft = cfg.decoder.fft_size;
  f.istft_hop = cfg.decoder.hop;
  return f;
}

std::int64_t segment_samples(const RunConfig& cfg) {
  return std::llround(cfg.train.segment_seconds * cfg.sample_rate);
}

std::vector<std::string> validate(const RunConfig& cfg) {
  std::vector<std::string> v;
  auto check = [&v](bool ok, const std::string& what) {
    if (!ok) v.push_back(what);
  };

  check(cfg.sample_rate > 0, "sample_rate must be positive");
  check(cfg.threads >= 1, "threads must be >= 1");

  const auto& e = cfg.encoder;
  FrameRateConfig f;
  bool timing_ok = false;
  try {
    f = frame_rate_config(cfg);
    timing_ok = true;
  } catch (const ConfigError& err) {
    v.push_back(err.what());
  }
  check(e.base_channels > 0, "encoder.base_channels must be positive");
  check(e.dim > 0 && e.transformer_heads > 0 && e.dim % e.transformer_heads == 0,
        "encoder.dim must be a positive multiple of encoder.transformer_heads");
  check(e.transformer_layers >= 0, "encoder.transformer_layers must be >= 0");
  check(e.transformer_ffn > 0, "encoder.transformer_ffn must be positive");
  check(e.code_dim > 0, "encoder.code_dim must be positive");
  check(e.residual_kernel > 0 && e.residual_kernel % 2 == 1,
        "encoder.residual_kernel must be a positive odd number");

  const auto& d = cfg.decoder;
  check(d.type == "vocos" || d.type == "mirrored", "decoder.type must be vocos or mirrored");
  check(d.hidden > 0 && d.intermediate > 0 && d.layers >= 1, "decoder sizes must be positive");
  check(d.aux_hidden > 0 && d.aux_intermediate > 0 && d.aux_layers >= 1,
        "decoder aux sizes must be positive");
  check(d.aux_layers <= d.layers && d.aux_hidden <= d.hidden &&
            d.aux_intermediate <= d.intermediate &&
            (d.aux_layers < d.layers || d.aux_hidden < d.hidden),
        "auxiliary decoder must be strictly smaller than the main decoder");
  check(d.hop > 0 && d.fft_size > 0 && d.fft_size % 2 == 0 && (d.fft_size - d.hop) % 2 == 0,
        "decoder.fft_size must be even and fft_size - hop even");
  check(satisfies_cola(d.fft_size, d.hop), "decoder fft_size/hop pair is not COLA");
  check(d.upsample_factor >= 1 && (d.upsample_factor == 1 || d.upsample_factor % 2 == 0),
        "decoder.upsample_factor must be 1 or even");
  if (timing_ok) {
    check(static_cast<std::int64_t>(f.samples_per_frame) ==
              static_cast<std::int64_t>(d.upsample_factor) * d.hop,
          "frame_rate x upsample_factor x istft_hop must equal sample_rate (samples per frame " +
              std::to_string(f.samples_per_frame) + " vs " +
              std::to_string(d.upsample_factor * d.hop) + ")");
  }

  const auto& q = cfg.quantizer;
  check(q.codebook_size >= 2, "quantizer.codebook_size must be >= 2");
  check(q.num_acoustic == kNumAcousticQuantizers,
        "quantizer.num_acoustic must be " + std::to_string(kNumAcousticQuantizers));
  check(q.ema_decay > 0.0 && q.ema_decay <= 1.0, "quantizer.ema_decay must be in (0, 1]");
  check(q.kmeans_iters >= 0, "quantizer.kmeans_iters must be >= 0");
  check(q.dead_code_window_steps >= 0 && q.dead_code_windows >= 1,
        "dead-code window settings must be non-negative (windows >= 1)");
  const bool reference_scale = cfg.preset.rfind("toy", 0) != 0;
  if (reference_scale && timing_ok) {
    const int expected = f.frame_rate == 25.0     ? 1024
                         : f.frame_rate == 12.5   ? 2048
                         : f.frame_rate == 6.25   ? 4096
                                                  : q.codebook_size;
    check(q.codebook_size == expected, "codebook size " + std::to_string(q.codebook_size) +
                                           " does not match frame rate " +
                                           std::to_string(f.frame_rate) + " Hz (expected " +
                                           std::to_string(expected) + ")");
  }

  const auto& t = cfg.teacher;
  check(t.backend == "standin" || t.backend == "torchscript",
        "teacher.backend must be standin or torchscript");
  check(t.backend != "torchscript" || !t.weights.empty(),
        "teacher.weights is required for the torchscript backend");
  check(t.frame_rate > 0.0, "teacher.frame_rate must be positive");
  if (t.backend == "standin") {
    check(!t.strides.empty() && t.strides.size() == t.channels.size(),
          "teacher strides and channels must have equal, non-zero length");
    check(std::abs(static_cast<double>(stride_product(t.strides)) * t.frame_rate -
                   cfg.sample_rate) < 1e-9,
          "teacher strides must multiply to sample_rate / teacher.frame_rate");
    check(t.dim > 0 && t.transformer_heads > 0 && t.dim % t.transformer_heads == 0,
          "teacher.dim must be a positive multiple of teacher.transformer_heads");
  }

  const auto& dc = cfg.discriminator;
  check(dc.channels > 0 && dc.layers >= 1, "discriminator channels/layers must be positive");
  check(!dc.stft_ffts.empty() || !dc.periods.empty() || dc.num_scales > 0,
        "at least one discriminator is required");

  const auto& w = cfg.weights;
  for (auto [name, value] : {std::pair{"time", w.time}, {"mel_l1", w.mel_l1},
                             {"mel_l2", w.mel_l2}, {"gen", w.gen}, {"feat", w.feat},
                             {"commit", w.commit}, {"distill", w.distill}}) {
    check(std::isfinite(value) && value >= 0.0,
          std::string("weights.") + name + " must be finite and >= 0");
  }

  const auto& a = cfg.arms;
  check(a.distill == "recon" || a.distill == "feature" || a.distill == "none",
        "arms.distill must be recon, feature or none");
  check(a.aux == "decoupled" || a.aux == "shared" || a.aux == "frozen",
        "arms.aux must be decoupled, shared or frozen");
  check(a.encoder == "dual" || a.encoder == "single", "arms.encoder must be dual or single");
  if (a.distill == "feature" && timing_ok) {
    const double ratio = t.frame_rate / f.frame_rate;
    check(std::abs(ratio - std::round(ratio)) < 1e-12 && ratio >= 1.0,
          "feature distillation needs teacher.frame_rate to be an integer multiple of the frame rate");
  }

  const auto& tr = cfg.train;
  check(tr.segment_seconds > 0.0, "train.segment_seconds must be positive");
  if (timing_ok) {
    const auto seg = segment_samples(cfg);
    check(std::abs(tr.segment_seconds * cfg.sample_rate - static_cast<double>(seg)) < 1e-6 &&
              seg % f.samples_per_frame == 0,
          "train.segment_seconds x sample_rate must be a multiple of the frame hop (" +
              std::to_string(f.samples_per_frame) + " samples)");
    check(seg > (1 << kMelLossMaxExp) / 2, "train.segment_seconds too short for the mel loss");
  }
  check(tr.batch_size >= 1 && tr.accum_steps >= 1, "train batch_size/accum_steps must be >= 1");
  check(tr.lr > 0.0 && tr.disc_lr > 0.0, "learning rates must be positive");
  check(tr.beta1 >= 0.0 && tr.beta1 < 1.0 && tr.beta2 >= 0.0 && tr.beta2 < 1.0,
        "Adam betas must be in [0, 1)");
  check(tr.weight_decay >= 0.0 && tr.grad_clip >= 0.0, "weight_decay/grad_clip must be >= 0");
  check(tr.epochs >= 1 && tr.max_steps >= 0, "train.epochs must be >= 1, max_steps >= 0");
  check(tr.log_every >= 1 && tr.checkpoint_every >= 0, "log/checkpoint cadence invalid");
  return v;
}

void ensure_valid(const RunConfig& cfg) {
  auto v = validate(cfg);
  if (!v.empty()) throw ConfigError(std::move(v));
}

std::vector<std::string> preset_names() {
  return {"25hz", "12.5hz", "6.25hz", "toy-25hz", "toy-12.5hz", "toy-6.25hz"};
}

nlohmann::json preset_json(const std::string& name) {
  RunConfig c;
  c.preset = name;
  std::string rate = name;
  const bool toy = name.rfind("toy-", 0) == 0;
  if (toy) rate = name.substr(4);

  if (rate == "25hz") {
    c.encoder.strides = {8, 5, 4, 2};
    c.decoder.upsample_factor = 2;
    c.quantizer.codebook_size = 1024;
    c.train.segment_seconds = 6.0;
    c.train.epochs = 20;
  } else if (rate == "12.5hz") {
    c.encoder.strides = {8, 5, 4, 4};
    c.decoder.upsample_factor = 4;
    c.quantizer.codebook_size = 2048;
    c.train.segment_seconds = 6.0;
    c.train.epochs = 20;
  } else if (rate == "6.25hz") {
    c.encoder.strides = {8, 8, 5, 4};
    c.decoder.upsample_factor = 8;
    c.quantizer.codebook_size = 4096;
    c.train.segment_seconds = 5.6;
    c.train.epochs = 25;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }

  if (toy) {
    c.encoder.base_channels = 8;
    c.encoder.dim = 128;
    c.encoder.transformer_layers = 2;
    c.encoder.transformer_heads = 4;
    c.encoder.transformer_ffn = 256;
    c.encoder.code_dim = 64;
    c.decoder.hidden = 128;
    c.decoder.intermediate = 384;
    c.decoder.layers = 2;
    c.decoder.aux_hidden = 48;
    c.decoder.aux_intermediate = 128;
    c.decoder.aux_layers = 1;
    c.quantizer.codebook_size = 64;
    c.teacher.channels = {32, 64, 128, 384};
    c.discriminator.channels = 8;
    c.train.segment_seconds = 1.28;
    c.train.batch_size = 4;
    c.train.accum_steps = 1;
    c.train.epochs = 1000;
    c.train.out_dir = "runs/" + name;
  }
  return to_json(c);
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception&) {
    value = raw;
  }
  nlohmann::json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
}

RunConfig resolve_config(const nlohmann::json& layered) {
  const std::string preset = layered.value("preset", std::string("25hz"));
  auto doc = preset_json(preset);
  doc.merge_patch(layered);
  RunConfig cfg;
  try {
    cfg = from_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  // Reject keys the schema does not know so typos do not pass silently.
  auto canonical = to_json(cfg);
  std::vector<std::string> unknown;
  std::function<void(const nlohmann::json&, const nlohmann::json&, const std::string&)> walk =
      [&](const nlohmann::json& given, const nlohmann::json& known, const std::string& prefix) {
        for (auto it = given.begin(); it != given.end(); ++it) {
          const auto path = prefix.empty() ? it.key() : prefix + "." + it.key();
          if (!known.contains(it.key())) {
            unknown.push_back("unknown configuration key '" + path + "'");
          } else if (it->is_object() && known.at(it.key()).is_object()) {
            walk(*it, known.at(it.key()), path);
          }
        }
      };
  walk(layered, canonical, "");
  if (!unknown.empty()) throw ConfigError(std::move(unknown));
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  nlohmann::json doc = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("cannot parse config " + path + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return resolve_config(doc);
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = cfg;
  return j;
}

RunConfig from_json(const nlohmann::json& j) { return j.get<RunConfig>(); }

std::string config_digest(const RunConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

}  // namespace semcodec
