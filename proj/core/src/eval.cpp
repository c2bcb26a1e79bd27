#include "semcodec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <torch/torch.h>

#include "semcodec/errors.hpp"
#include "semcodec/klgauss.hpp"
#include "semcodec/plugins.hpp"
#include "semcodec/signal.hpp"

namespace semcodec {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t pack(std::int32_t a, std::int32_t b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

std::vector<std::int32_t> dedup(const std::vector<std::int32_t>& ids) {
  std::vector<std::int32_t> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    if (out.empty() || out.back() != id) out.push_back(id);
  }
  return out;
}

std::vector<std::uint64_t> minhash_signature(const std::vector<std::int32_t>& ids,
                                             const LshOptions& opts) {
  if (opts.num_hashes < 1) throw ConfigError("num_hashes must be >= 1");
  std::set<std::uint64_t> shingles;
  if (ids.size() == 1) {
    shingles.insert(pack(ids[0], -1));
  }
  for (std::size_t i = 0; i + 1 < ids.size(); ++i) shingles.insert(pack(ids[i], ids[i + 1]));

  std::vector<std::uint64_t> sig(static_cast<std::size_t>(opts.num_hashes),
                                 std::numeric_limits<std::uint64_t>::max());
  for (int h = 0; h < opts.num_hashes; ++h) {
    const auto salt = splitmix64(opts.seed + static_cast<std::uint64_t>(h));
    for (auto s : shingles) {
      sig[static_cast<std::size_t>(h)] = std::min(sig[static_cast<std::size_t>(h)], splitmix64(s ^ salt));
    }
  }
  return sig;
}

std::uint64_t lsh_bucket(const std::vector<std::int32_t>& ids, const LshOptions& opts) {
  std::uint64_t acc = splitmix64(opts.seed ^ 0xB0C4E7ULL);
  for (auto v : minhash_signature(ids, opts)) acc = splitmix64(acc ^ v);
  return acc;
}

std::vector<std::int32_t> stream_ids(const TokenSequence& t, int stream) {
  if (stream == kSemanticStream) return t.semantic_ids;
  if (stream < 0 || stream >= kNumAcousticQuantizers) {
    throw RangeError("stream index " + std::to_string(stream) + " out of range");
  }
  std::vector<std::int32_t> out(static_cast<std::size_t>(t.frames()));
  for (std::int64_t i = 0; i < t.frames(); ++i) out[static_cast<std::size_t>(i)] = t.acoustic(i, stream);
  return out;
}

std::string stream_name(int stream) {
  return stream == kSemanticStream ? "semantic" : "acoustic" + std::to_string(stream);
}

double normalized_mutual_information(const std::vector<std::uint64_t>& buckets,
                                     const std::vector<std::string>& labels) {
  if (buckets.size() != labels.size()) throw ShapeError("buckets and labels differ in count");
  std::map<std::string, double> n_y;
  std::map<std::uint64_t, double> n_b;
  std::map<std::pair<std::uint64_t, std::string>, double> n_by;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    n_y[labels[i]] += 1.0;
    n_b[buckets[i]] += 1.0;
    n_by[{buckets[i], labels[i]}] += 1.0;
  }
  if (n_y.size() < 2) throw RangeError("SNMI needs at least two transcript classes");
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (const auto& [_, c] : n_y) h -= (c / n) * std::log(c / n);
  double mi = 0.0;
  for (const auto& [key, c] : n_by) {
    mi += (c / n) * std::log(c * n / (n_b[key.first] * n_y[key.second]));
  }
  return std::clamp(mi / h, 0.0, 1.0);
}

double snmi(const EvalCorpus& corpus, int stream, const LshOptions& opts) {
  std::vector<std::uint64_t> buckets;
  std::vector<std::string> labels;
  buckets.reserve(corpus.size());
  for (const auto& item : corpus) {
    buckets.push_back(lsh_bucket(dedup(stream_ids(item.tokens, stream)), opts));
    labels.push_back(item.transcript);
  }
  return normalized_mutual_information(buckets, labels);
}

double snmi_ratio(const EvalCorpus& corpus, const LshOptions& opts) {
  const double sem = snmi(corpus, kSemanticStream, opts);
  if (sem == 0.0) throw RangeError("semantic SNMI is 0; ratio undefined");
  double ac = 0.0;
  for (int k = 0; k < kNumAcousticQuantizers; ++k) ac += snmi(corpus, k, opts);
  return ac / kNumAcousticQuantizers / sem;
}

CollisionAudit audit_collisions(const std::vector<std::vector<std::int32_t>>& sequences,
                                const LshOptions& opts) {
  std::map<std::vector<std::int32_t>, std::uint64_t> distinct;
  for (const auto& s : sequences) distinct.emplace(s, lsh_bucket(s, opts));
  std::map<std::uint64_t, std::size_t> per_bucket;
  for (const auto& [_, b] : distinct) ++per_bucket[b];
  CollisionAudit a;
  a.distinct_sequences = distinct.size();
  a.buckets = per_bucket.size();
  for (const auto& [_, c] : per_bucket) a.colliding_pairs += c * (c - 1) / 2;
  return a;
}

double si_snr(const std::vector<float>& reference, const std::vector<float>& estimate) {
  const std::size_t n = std::min(reference.size(), estimate.size());
  if (n == 0) throw RangeError("si_snr needs non-empty signals");
  double mr = 0.0, me = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mr += reference[i];
    me += estimate[i];
  }
  mr /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double dot = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = reference[i] - mr;
    dot += r * (estimate[i] - me);
    rr += r * r;
  }
  if (rr <= 0.0) throw RangeError("si_snr reference has zero energy");
  const double alpha = dot / rr;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = alpha * (reference[i] - mr);
    const double e = (estimate[i] - me) - s;
    target += s * s;
    noise += e * e;
  }
  if (noise <= 0.0) return kSiSnrCap;
  if (target <= 0.0) return -kSiSnrCap;
  return std::clamp(10.0 * std::log10(target / noise), -kSiSnrCap, kSiSnrCap);
}

double si_snr(const Waveform& reference, const Waveform& estimate) {
  if (reference.sample_rate != estimate.sample_rate) throw RangeError("si_snr sample rates differ");
  return si_snr(reference.samples, estimate.samples);
}

DelayedTokenGrid apply_delay(const TokenSequence& t) {
  t.validate();
  DelayedTokenGrid g;
  const auto frames = t.frames();
  g.steps = frames + 1;
  g.frame_rate = t.frame_rate;
  g.semantic_codebook_size = t.semantic_codebook_size;
  g.acoustic_codebook_sizes = t.acoustic_codebook_sizes;
  std::int64_t pad = t.semantic_codebook_size;
  for (auto s : t.acoustic_codebook_sizes) pad = std::max(pad, s);
  g.pad = static_cast<std::int32_t>(pad);
  g.cells.assign(static_cast<std::size_t>(g.steps * DelayedTokenGrid::kColumns), g.pad);
  for (std::int64_t s = 0; s < frames; ++s) {
    g.cells[static_cast<std::size_t>(s * DelayedTokenGrid::kColumns)] = t.semantic_ids[static_cast<std::size_t>(s)];
    for (int k = 0; k < kNumAcousticQuantizers; ++k) {
      g.cells[static_cast<std::size_t>((s + 1) * DelayedTokenGrid::kColumns + 1 + k)] = t.acoustic(s, k);
    }
  }
  return g;
}

TokenSequence invert_delay(const DelayedTokenGrid& g) {
  if (g.cells.size() != static_cast<std::size_t>(g.steps * DelayedTokenGrid::kColumns)) {
    throw FormatError("delay grid cell count does not match its step count");
  }
  if (g.steps < 2) throw FormatError("delay grid holds no frames");
  const auto frames = g.steps - 1;
  TokenSequence t;
  t.frame_rate = g.frame_rate;
  t.semantic_codebook_size = g.semantic_codebook_size;
  t.acoustic_codebook_sizes = g.acoustic_codebook_sizes;
  t.semantic_ids.resize(static_cast<std::size_t>(frames));
  t.acoustic_ids.resize(static_cast<std::size_t>(frames * kNumAcousticQuantizers));
  auto cell_error = [](std::int64_t s, int c, const char* what) {
    return FormatError("delay grid cell (step " + std::to_string(s) + ", column " +
                       std::to_string(c) + ") " + what);
  };
  for (std::int64_t s = 0; s < g.steps; ++s) {
    for (int c = 0; c < DelayedTokenGrid::kColumns; ++c) {
      const auto v = g.at(s, c);
      const bool staggered = (c == 0 && s == frames) || (c > 0 && s == 0);
      if (staggered) {
        if (v != g.pad) throw cell_error(s, c, "must be pad");
        continue;
      }
      if (v == g.pad) throw cell_error(s, c, "holds pad inside the token span");
      if (c == 0) {
        t.semantic_ids[static_cast<std::size_t>(s)] = v;
      } else {
        t.acoustic_ids[static_cast<std::size_t>((s - 1) * kNumAcousticQuantizers + (c - 1))] = v;
      }
    }
  }
  t.validate();
  return t;
}

std::vector<double> time_mean(const torch::Tensor& frames) {
  if (frames.dim() != 2 || frames.size(0) == 0) throw ShapeError("time_mean needs a non-empty [T, d]");
  auto m = frames.to(torch::kFloat64).mean(0).contiguous();
  return {m.data_ptr<double>(), m.data_ptr<double>() + m.numel()};
}

std::vector<EmbeddingRecord> export_embeddings(TokenizerModelImpl& model,
                                               const std::vector<ClipRef>& clips) {
  std::vector<EmbeddingRecord> out;
  out.reserve(clips.size() * 2);
  for (const auto& clip : clips) {
    auto tokens = model.encode(load_audio(clip.path));
    auto z = decode_tokens(tokens, *model.quantizer());
    out.push_back({clip.id, clip.speaker, "semantic", time_mean(z.z_sem)});
    out.push_back({clip.id, clip.speaker, "acoustic", time_mean(z.z_ac)});
  }
  return out;
}

void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings to " + path.string());
  for (const auto& r : records) {
    out << nlohmann::json{{"id", r.id}, {"speaker", r.speaker}, {"stream", r.stream}, {"vector", r.vector}}.dump()
        << '\n';
  }
}

namespace {

Waveform load_at(const std::string& path, int rate) {
  auto w = load_audio(path);
  return w.sample_rate == rate ? w : resample(w, rate);
}

}  // namespace

nlohmann::json evaluate(TokenizerModelImpl& model, const Manifest& manifest,
                        const EvalOptions& opts, const std::string& checkpoint_digest) {
  const auto& cfg = model.config();
  const std::set<std::string> wanted(opts.metrics.begin(), opts.metrics.end());
  const bool need_audio = wanted.count("si_snr") || wanted.count("mel_distance");

  PluginRegistry plugins;
  if (!opts.plugins.empty()) plugins = PluginRegistry::from_file(opts.plugins);

  EvalCorpus corpus;
  double si_sum = 0.0, mel_sum = 0.0;
  std::map<std::string, std::vector<double>> plugin_values;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& r : manifest.records) {
    auto x = load_at(r.path, cfg.sample_rate);
    auto tokens = model.encode(x);
    corpus.push_back({tokens, r.transcript});
    Waveform x_hat;
    if (need_audio || !plugins.empty()) x_hat = model.decode(tokens, DecodeMode::full);
    if (wanted.count("si_snr")) si_sum += si_snr(x, x_hat);
    if (wanted.count("mel_distance")) mel_sum += multiscale_mel_loss(x, x_hat);
    for (const auto& name : opts.metrics) {
      if (name == "snmi" || name == "si_snr" || name == "mel_distance") continue;
      auto res = plugin_metric(plugins, name, &x, &x_hat, &tokens);
      if (!res.available) {
        metrics[name] = {{"status", "unavailable"}, {"detail", res.detail}};
        continue;
      }
      plugin_values[name].push_back(res.value);
    }
  }
  const double n = static_cast<double>(manifest.records.size());
  if (wanted.count("si_snr")) metrics["si_snr_db"] = si_sum / n;
  if (wanted.count("mel_distance")) metrics["mel_distance"] = mel_sum / n;
  for (const auto& [name, values] : plugin_values) {
    double s = 0.0;
    for (double v : values) s += v;
    metrics[name] = {{"status", "ok"}, {"value", s / static_cast<double>(values.size())}};
  }
  if (wanted.count("snmi")) {
    nlohmann::json per_stream = nlohmann::json::object();
    std::vector<std::vector<std::int32_t>> sequences;
    for (int s = kSemanticStream; s < kNumAcousticQuantizers; ++s) {
      per_stream[stream_name(s)] = snmi(corpus, s, opts.lsh);
    }
    for (const auto& item : corpus) sequences.push_back(dedup(item.tokens.semantic_ids));
    metrics["snmi"] = per_stream;
    const double sem = per_stream["semantic"].get<double>();
    metrics["snmi_ratio"] = sem > 0.0 ? nlohmann::json(snmi_ratio(corpus, opts.lsh)) : nlohmann::json();
    const auto audit = audit_collisions(sequences, opts.lsh);
    metrics["lsh"] = {{"num_hashes", opts.lsh.num_hashes},
                      {"seed", opts.lsh.seed},
                      {"distinct_semantic_sequences", audit.distinct_sequences},
                      {"buckets", audit.buckets},
                      {"colliding_pairs", audit.colliding_pairs}};
  }
  return {{"type", "eval"},
          {"items", manifest.records.size()},
          {"config_digest", config_digest(cfg)},
          {"checkpoint_digest", checkpoint_digest},
          {"metrics", metrics}};
}

nlohmann::json kl_report(TokenizerModelImpl& model, Teacher& teacher, const Manifest& manifest,
                         const std::string& checkpoint_digest) {
  const auto& cfg = model.config();
  torch::NoGradGuard guard;
  model.eval();
  std::vector<torch::Tensor> t_frames, r_frames, s_frames;
  for (const auto& rec : manifest.records) {
    auto x = load_at(rec.path, cfg.sample_rate);
    auto tokens = model.encode(x);
    auto x_sem = model.decode(tokens, DecodeMode::semantic_only);
    auto ft = teacher.encode(to_tensor(x)).squeeze(0);
    auto fr = teacher.encode(to_tensor(x_sem)).squeeze(0);
    auto [a, b] = align_truncate(ft, fr);
    t_frames.push_back(a);
    r_frames.push_back(b);
    if (cfg.arms.distill == "feature") {
      auto z = decode_tokens(tokens, *model.quantizer());
      s_frames.push_back(model.project_features(z.z_sem));
    }
  }
  auto teacher_stats = fit_gaussian_stats(torch::cat(t_frames));
  auto recon_stats = fit_gaussian_stats(torch::cat(r_frames));
  nlohmann::json report{{"type", "kl_report"},
                        {"items", manifest.records.size()},
                        {"d", teacher_stats.dim()},
                        {"sigma_teacher", teacher_stats.sigma},
                        {"sigma_recon", recon_stats.sigma},
                        {"kl_recon", kl_recon(teacher_stats, recon_stats.mu)},
                        {"kl_feature_recon_path", kl_feature(teacher_stats, recon_stats)},
                        {"config_digest", config_digest(cfg)},
                        {"checkpoint_digest", checkpoint_digest}};
  if (!s_frames.empty()) {
    auto student = fit_gaussian_stats(torch::cat(s_frames));
    report["sigma_student"] = student.sigma;
    report["kl_feature"] = kl_feature(teacher_stats, student);
  } else {
    report["kl_feature"] = nullptr;
  }
  return report;
}

}  // namespace semcodec
