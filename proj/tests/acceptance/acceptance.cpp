// Acceptance runner: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "semcodec/checkpoint.hpp"
#include "semcodec/config.hpp"
#include "semcodec/digest.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/eval.hpp"
#include "semcodec/klgauss.hpp"
#include "semcodec/losses.hpp"
#include "semcodec/quantize.hpp"
#include "semcodec/signal.hpp"
#include "semcodec/synth.hpp"
#include "semcodec/train.hpp"

namespace fs = std::filesystem;
using namespace semcodec;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path g_workdir;

fs::path fresh_dir(const std::string& name) {
  auto p = g_workdir / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Manifest corpus(const fs::path& dir, int speakers, int sentences) {
  SynthOptions o;
  o.speakers = speakers;
  o.sentences = sentences;
  return synth_corpus(dir, o);
}

RunConfig toy(const fs::path& out) {
  auto cfg = resolve_config({{"preset", "toy-25hz"}});
  cfg.seed = 7;
  cfg.train.out_dir = out.string();
  return cfg;
}

// 1 ------------------------------------------------------------------------

Outcome frame_rates() {
  Outcome o;
  for (const std::string preset : {"25hz", "12.5hz", "6.25hz"}) {
    const auto cfg = resolve_config({{"preset", preset}});
    const auto f = frame_rate_config(cfg);
    const double prod = std::accumulate(f.conv_strides.begin(), f.conv_strides.end(), 1.0,
                                        std::multiplies<>());
    o.check(prod * f.transformer_downsample * f.frame_rate == 16000.0,
            preset + ": strides x downsample x rate != 16000");
    o.check(f.frame_rate * f.upsample_factor * f.istft_hop == 16000.0,
            preset + ": rate x upsample x hop != 16000");
    o.check(validate(cfg).empty(), preset + ": config invalid");
    o.note(preset + " -> " + fmt("%g Hz", f.frame_rate));
  }
  return o;
}

// 2 ------------------------------------------------------------------------

std::int64_t brute_nearest(const float* x, const torch::Tensor& cb) {
  auto a = cb.accessor<float, 2>();
  std::int64_t best = 0;
  double best_d = INFINITY;
  for (std::int64_t k = 0; k < cb.size(0); ++k) {
    double d = 0.0;
    for (std::int64_t j = 0; j < cb.size(1); ++j) {
      const double diff = static_cast<double>(x[j]) - a[k][j];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Outcome quantizer_oracle() {
  Outcome o;
  torch::manual_seed(2);
  const std::int64_t n = 1000, dim = 8;
  std::int64_t mismatches = 0;
  for (int stages = 1; stages <= 3; ++stages) {
    for (std::int64_t k : {2, 7, 32}) {
      auto frames = torch::randn({n, dim});
      std::vector<Codebook> books;
      for (int s = 0; s < stages; ++s) books.push_back(Codebook::from_entries(torch::randn({k, dim})));
      auto r = rvq_encode(frames, books);
      auto residual = frames.clone().contiguous();
      for (int s = 0; s < stages; ++s) {
        for (std::int64_t i = 0; i < n; ++i) {
          const auto want = brute_nearest(residual[i].data_ptr<float>(), books[s].entries);
          if (r.ids[i][s].item<std::int64_t>() != want) ++mismatches;
          residual[i] -= books[s].entries[want];
        }
      }
      if (stages == 1) {
        auto v = vq_encode(frames, books[0]);
        o.check(torch::equal(v.ids, r.ids.select(-1, 0)), "vq and 1-stage rvq disagree");
      }
      o.check((frames - r.quantized_sum - residual).abs().max().item<double>() < 1e-5,
              "rvq sum mismatch");
    }
  }
  o.check(mismatches == 0, std::to_string(mismatches) + " id mismatches");

  auto pre = torch::randn({5, dim}, torch::requires_grad());
  auto post = torch::randn({5, dim});
  auto st = straight_through(pre, post);
  o.check(torch::allclose(st, post), "straight-through forward != quantized value");
  auto jac = torch::zeros({5 * dim, 5 * dim});
  auto flat = st.reshape({-1});
  for (std::int64_t i = 0; i < flat.size(0); ++i) {
    auto g = torch::autograd::grad({flat[i]}, {pre}, {}, true)[0];
    jac[i] = g.reshape({-1});
  }
  o.check(torch::equal(jac, torch::eye(5 * dim)), "straight-through Jacobian != identity");
  o.note("mismatches " + std::to_string(mismatches));
  return o;
}

// 3 ------------------------------------------------------------------------

Outcome signal_roundtrip() {
  Outcome o;
  torch::manual_seed(3);
  double worst = 0.0;
  for (auto pad : {StftPadding::center, StftPadding::same}) {
    for (auto [fft, hop] : {std::pair{1280, 320}, std::pair{1024, 256}, std::pair{512, 128}}) {
      auto x = torch::randn({2, 16000}, torch::kFloat64) * 0.3;
      auto y = istft(stft(x, fft, hop, pad));
      if (y.size(-1) != x.size(-1)) {
        o.check(false, "length mismatch");
        continue;
      }
      worst = std::max(worst,
                       (y - x).narrow(-1, fft, 16000 - 2 * fft).abs().max().item<double>());
    }
  }
  o.check(worst < 1e-6, "round-trip error " + fmt("%.3g", worst));

  auto x = torch::randn({1, 1600}, torch::kFloat64) * 0.3;
  auto y = (torch::randn({1, 1600}, torch::kFloat64) * 0.3).set_requires_grad(true);
  multiscale_mel_loss(x, y).total().backward();
  auto g = y.grad();
  double worst_rel = 0.0;
  const double h = 1e-6;
  std::mt19937 rng(3);
  for (int trial = 0; trial < 16; ++trial) {
    const int i = std::uniform_int_distribution<int>(0, 1599)(rng);
    auto yp = y.detach().clone();
    auto ym = y.detach().clone();
    yp[0][i] += h;
    ym[0][i] -= h;
    const double fd = (multiscale_mel_loss(x, yp).total().item<double>() -
                       multiscale_mel_loss(x, ym).total().item<double>()) / (2 * h);
    const double an = g[0][i].item<double>();
    worst_rel = std::max(worst_rel, std::abs(fd - an) / std::max(std::abs(an), 1e-8));
  }
  o.check(worst_rel < 1e-3, "mel gradient relative error " + fmt("%.3g", worst_rel));
  o.note("istft err " + fmt("%.2e", worst) + ", grad rel err " + fmt("%.2e", worst_rel));
  return o;
}

// 4 ------------------------------------------------------------------------

// E_T[log p_T(x) - log p_S(x)] over isotropic Gaussians.
double monte_carlo_kl(const GaussianStats& t, const GaussianStats& s, int samples,
                      std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t d = t.dim();
  const double st = std::sqrt(t.sigma);
  double acc = 0.0;
  for (int n = 0; n < samples; ++n) {
    double qt = 0.0, qs = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double e = z(rng);
      const double x = t.mu[j] + st * e;
      qt += e * e;
      qs += (x - s.mu[j]) * (x - s.mu[j]) / s.sigma;
    }
    acc += -0.5 * qt - 0.5 * d * std::log(t.sigma) + 0.5 * qs + 0.5 * d * std::log(s.sigma);
  }
  return acc / samples;
}

Outcome kl_diagnostics() {
  Outcome o;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0.0;
  for (std::size_t d : {1, 4, 16}) {
    GaussianStats t, s, r;
    for (std::size_t j = 0; j < d; ++j) {
      t.mu.push_back(u(rng));
      s.mu.push_back(t.mu[j] + u(rng));
    }
    t.sigma = 1.5;
    s.sigma = 0.6;
    r = {s.mu, t.sigma};
    const double cf = kl_feature(t, s);
    const double mc = monte_carlo_kl(t, s, 1000000, rng);
    const double cr = kl_recon(t, s.mu);
    const double mcr = monte_carlo_kl(t, r, 1000000, rng);
    worst = std::max({worst, std::abs(cf - mc) / cf, std::abs(cr - mcr) / cr});
  }
  o.check(worst < 0.02, "closed form vs Monte Carlo " + fmt("%.3g", worst));

  int violations = 0;
  double reduction = 0.0;
  std::uniform_int_distribution<int> dims(1, 16);
  std::uniform_real_distribution<double> pos(0.05, 4.0), frac(0.05, 0.95);
  for (int i = 0; i < 1000; ++i) {
    const int d = dims(rng);
    GaussianStats t;
    std::vector<double> gap;
    for (int j = 0; j < d; ++j) {
      t.mu.push_back(u(rng) * 3);
      gap.push_back(u(rng));
    }
    t.sigma = pos(rng);
    const auto c = check_inequality(t, t.sigma * frac(rng), gap, gap);
    if (!c.feature_exceeds_recon || !(c.kl_feature > c.kl_recon)) ++violations;

    std::vector<double> mu_s(d);
    for (int j = 0; j < d; ++j) mu_s[j] = t.mu[j] + gap[j];
    reduction = std::max(reduction,
                         std::abs(kl_feature(t, {mu_s, t.sigma}) - kl_recon(t, mu_s)));
  }
  o.check(violations == 0, std::to_string(violations) + " inequality violations");
  o.check(reduction <= 1e-12, "reduction error " + fmt("%.3g", reduction));
  o.note("MC rel err " + fmt("%.4f", worst) + ", reduction err " + fmt("%.1e", reduction));
  return o;
}

// 5 ------------------------------------------------------------------------

TokenSequence token_seq(const std::vector<std::int32_t>& semantic) {
  TokenSequence t;
  t.frame_rate = 25.0;
  t.semantic_codebook_size = 64;
  t.acoustic_codebook_sizes.assign(kNumAcousticQuantizers, 64);
  t.semantic_ids = semantic;
  t.acoustic_ids.assign(semantic.size() * kNumAcousticQuantizers, 0);
  return t;
}

// H(Y) - H(Y|B), normalized by H(Y), from raw counts.
double table_nmi(const std::vector<std::vector<double>>& counts) {
  double total = 0.0;
  std::vector<double> row(counts.size(), 0.0), col(counts[0].size(), 0.0);
  for (std::size_t b = 0; b < counts.size(); ++b)
    for (std::size_t y = 0; y < counts[b].size(); ++y) {
      row[b] += counts[b][y];
      col[y] += counts[b][y];
      total += counts[b][y];
    }
  double hy = 0.0, hyb = 0.0;
  for (double c : col)
    if (c > 0) hy -= c / total * std::log(c / total);
  for (std::size_t b = 0; b < counts.size(); ++b)
    for (std::size_t y = 0; y < counts[b].size(); ++y)
      if (counts[b][y] > 0) hyb -= counts[b][y] / total * std::log(counts[b][y] / row[b]);
  return (hy - hyb) / hy;
}

Outcome snmi_oracles() {
  Outcome o;
  std::mt19937 rng(5);
  EvalCorpus bijective, collapsed;
  for (int text = 0; text < 20; ++text) {
    std::vector<std::int32_t> base;
    for (int j = 0; j < 12; ++j) base.push_back(static_cast<std::int32_t>((text * 7 + j * 3) % 64));
    for (int rep = 0; rep < 5; ++rep) {
      // Repeats of a frame collapse under dedup, so stretched copies share a bucket.
      std::vector<std::int32_t> stretched;
      for (auto id : base) stretched.insert(stretched.end(), 1 + (rng() % 3), id);
      const auto label = "sentence " + std::to_string(text);
      bijective.push_back({token_seq(stretched), label});
      collapsed.push_back({token_seq({1, 2, 3, 2, 1}), label});
    }
  }
  const double one = snmi(bijective, kSemanticStream);
  const double zero = snmi(collapsed, kSemanticStream);
  o.check(std::abs(one - 1.0) <= 1e-9, "bijective SNMI " + fmt("%.12f", one));
  o.check(zero == 0.0, "collapsed SNMI " + fmt("%.3g", zero));

  const std::vector<std::vector<double>> table{
      {25, 0, 0, 0}, {5, 20, 0, 0}, {0, 0, 15, 10}, {0, 0, 0, 25}};
  std::vector<std::uint64_t> buckets;
  std::vector<std::string> labels;
  for (std::size_t b = 0; b < table.size(); ++b)
    for (std::size_t y = 0; y < table[b].size(); ++y)
      for (int c = 0; c < static_cast<int>(table[b][y]); ++c) {
        buckets.push_back(1000 + b);
        labels.push_back("y" + std::to_string(y));
      }
  std::shuffle(buckets.begin(), buckets.end(), std::mt19937(9));
  std::shuffle(labels.begin(), labels.end(), std::mt19937(9));
  const double got = normalized_mutual_information(buckets, labels);
  const double want = table_nmi(table);
  o.check(std::abs(got - want) <= 1e-9, "contingency NMI " + fmt("%.12f", got) + " vs " +
                                            fmt("%.12f", want));

  const std::vector<std::int32_t> seq{4, 4, 9, 9, 9, 2, 4, 4};
  o.check(dedup(seq) == std::vector<std::int32_t>({4, 9, 2, 4}), "dedup output");
  o.check(dedup(dedup(seq)) == dedup(seq), "dedup not idempotent");
  const auto b0 = lsh_bucket(dedup(seq));
  bool stable = true;
  for (int i = 0; i < 100; ++i) stable = stable && lsh_bucket(dedup(seq)) == b0;
  o.check(stable, "LSH bucket not deterministic");
  o.check(minhash_signature(seq) == minhash_signature(seq), "MinHash signature not deterministic");
  o.check(snmi(bijective, kSemanticStream) == one, "SNMI not deterministic");
  o.note("bijective " + fmt("%.12f", one) + ", table " + fmt("%.6f", got));
  return o;
}

// 6 ------------------------------------------------------------------------

bool all_zero_grad(torch::nn::Module& m, std::string& worst) {
  for (const auto& p : m.named_parameters()) {
    const auto& g = p.value().grad();
    if (g.defined() && g.abs().max().item<double>() != 0.0) {
      worst = p.key();
      return false;
    }
  }
  return true;
}

bool any_nonzero_grad(torch::nn::Module& m) {
  for (const auto& p : m.parameters())
    if (p.grad().defined() && p.grad().abs().max().item<double>() > 0.0) return true;
  return false;
}

Outcome decoupling() {
  Outcome o;
  const auto dir = fresh_dir("c6");
  auto cfg = toy(dir / "run");
  auto m = corpus(dir / "corpus", 2, 4);
  Trainer trainer(cfg);
  trainer.set_manifest(m);
  auto& model = trainer.model();

  auto x = trainer.next_batch();
  model->zero_grad();
  auto q = model->quantize(x);
  auto loss = distill_recon(trainer.teacher(), x, model->decode_aux(q.z_sem));
  loss.backward();
  std::string which;
  o.check(all_zero_grad(model->main_decoder(), which), "main decoder grad at " + which);
  o.check(all_zero_grad(*model->acoustic_encoder(), which), "acoustic encoder grad at " + which);
  o.check(any_nonzero_grad(*model->aux_decoder()), "aux decoder received no gradient");
  o.check(any_nonzero_grad(*model->semantic_encoder()), "semantic encoder received no gradient");
  model->zero_grad();

  const auto before = trainer.teacher().digest();
  int changed = 0;
  trainer.run(100, [&](const StepReport&) {
    if (trainer.teacher().digest() != before) ++changed;
  });
  o.check(trainer.state().step == 100, "ran " + std::to_string(trainer.state().step) + " steps");
  o.check(changed == 0, "teacher digest changed on " + std::to_string(changed) + " steps");
  o.note("teacher " + before.substr(0, 12) + " over 100 steps");
  return o;
}

// 7 ------------------------------------------------------------------------

double mean_si_snr(TokenizerModelImpl& model, const Manifest& m) {
  double acc = 0.0;
  for (const auto& r : m.records) {
    const auto w = load_audio(r.path);
    acc += si_snr(w, model.decode(model.encode(w)));
  }
  return acc / static_cast<double>(m.records.size());
}

double window_mean(const std::vector<StepReport>& rs, std::size_t from, std::size_t n,
                   const std::string& key) {
  double acc = 0.0;
  for (std::size_t i = from; i < from + n; ++i) acc += rs[i].losses.at(key);
  return acc / static_cast<double>(n);
}

Outcome training_trend() {
  Outcome o;
  const auto dir = fresh_dir("c7");
  auto cfg = toy(dir / "run");
  auto m = corpus(dir / "corpus", 4, 8);
  Trainer trainer(cfg);
  trainer.set_manifest(m);

  Manifest held;
  for (std::size_t i = 0; i < m.records.size(); i += 4) held.records.push_back(m.records[i]);
  const double snr0 = mean_si_snr(*trainer.model(), held);

  const int steps = 500;
  auto reports = trainer.run(steps);
  if (static_cast<int>(reports.size()) != steps) {
    o.check(false, "ran " + std::to_string(reports.size()) + " steps");
    return o;
  }
  const double total0 = window_mean(reports, 0, 10, "loss_total");
  const double total1 = window_mean(reports, steps - 10, 10, "loss_total");
  const double dist0 = window_mean(reports, 0, 10, "loss_distill");
  const double dist1 = window_mean(reports, steps - 10, 10, "loss_distill");
  const double snr1 = mean_si_snr(*trainer.model(), held);

  const double total_drop = 1.0 - total1 / total0;
  const double dist_drop = 1.0 - dist1 / dist0;
  o.check(total_drop >= 0.30, "total loss drop " + fmt("%.1f%%", 100 * total_drop));
  o.check(dist_drop >= 0.30, "distill loss drop " + fmt("%.1f%%", 100 * dist_drop));
  o.check(snr1 - snr0 >= 3.0, "SI-SNR gain " + fmt("%.2f dB", snr1 - snr0));
  o.note("total " + fmt("%.2f", total0) + " -> " + fmt("%.2f", total1) + ", distill " +
         fmt("%.4f", dist0) + " -> " + fmt("%.4f", dist1) + ", SI-SNR " + fmt("%.2f", snr0) +
         " -> " + fmt("%.2f dB", snr1));
  return o;
}

// 8 ------------------------------------------------------------------------

std::set<std::string> keys_of(const nlohmann::json& j, const std::string& prefix = "") {
  std::set<std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto k = prefix + it.key();
    out.insert(k);
    if (it->is_object())
      for (const auto& sub : keys_of(*it, k + ".")) out.insert(sub);
  }
  return out;
}

Outcome arm_parity() {
  Outcome o;
  const auto dir = fresh_dir("c8");
  auto m = corpus(dir / "corpus", 2, 4);
  struct Arm {
    std::string name;
    std::function<void(RunConfig&)> apply;
  };
  const std::vector<Arm> arms{
      {"recon", [](RunConfig&) {}},
      {"feature", [](RunConfig& c) { c.arms.distill = "feature"; }},
      {"shared", [](RunConfig& c) { c.arms.aux = "shared"; }},
      {"frozen", [](RunConfig& c) { c.arms.aux = "frozen"; }},
      {"mirrored", [](RunConfig& c) { c.decoder.type = "mirrored"; }},
      {"single", [](RunConfig& c) { c.arms.encoder = "single"; }},
  };
  std::set<std::string> ref_eval, ref_log;
  for (const auto& arm : arms) {
    auto cfg = toy(dir / arm.name);
    arm.apply(cfg);
    try {
      Trainer trainer(cfg);
      trainer.set_manifest(m);
      auto reports = trainer.run(30);
      const auto ckpt = dir / arm.name / "final.ckpt";
      trainer.save_checkpoint(ckpt);
      auto model = load_model(ckpt);
      auto report = evaluate(*model, m, EvalOptions{}, sha256_file(ckpt));
      std::ofstream(dir / arm.name / "eval_report.json") << report.dump(2);

      std::set<std::string> log_keys;
      for (const auto& [k, v] : reports.back().losses) log_keys.insert(k);
      auto eval_keys = keys_of(report);
      o.check(reports.size() == 30, arm.name + " stopped early");
      if (ref_eval.empty()) {
        ref_eval = eval_keys;
        ref_log = log_keys;
      }
      o.check(eval_keys == ref_eval, arm.name + " eval report keys differ");
      o.check(log_keys == ref_log, arm.name + " step log keys differ");
      o.note(arm.name + " ok");
    } catch (const std::exception& e) {
      o.check(false, arm.name + " threw: " + e.what());
    }
  }
  return o;
}

// 9 ------------------------------------------------------------------------

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  const auto dir = fresh_dir("c9");
  auto m = corpus(dir / "corpus", 2, 4);
  const int steps = 8;

  std::vector<std::string> logs;
  for (const std::string run : {"a", "b"}) {
    Trainer t(toy(dir / run));
    t.set_manifest(m);
    t.run(steps);
    logs.push_back(read_text(t.log_path()));
  }
  o.check(!logs[0].empty() && logs[0] == logs[1], "seeded step logs differ");

  Trainer straight(toy(dir / "straight"));
  straight.set_manifest(m);
  straight.run(steps / 2);
  const auto ckpt = dir / "mid.ckpt";
  straight.save_checkpoint(ckpt);
  const auto want = straight.step();

  torch::manual_seed(12345);
  torch::rand({100});
  Trainer resumed(toy(dir / "resumed"));
  resumed.set_manifest(m);
  resumed.load_checkpoint(ckpt);
  const auto got = resumed.step();
  o.check(got == want, "resumed step report differs");
  o.check(parameter_digest(*resumed.model()) == parameter_digest(*straight.model()),
          "resumed parameters differ");
  o.check(parameter_digest(*resumed.discriminators()) ==
              parameter_digest(*straight.discriminators()),
          "resumed discriminator parameters differ");
  o.note("loss_total at step " + std::to_string(want.step) + " " +
         fmt("%.9g", want.losses.at("loss_total")));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semcodec acceptance checks"};
  int only = 0;
  std::string workdir = (fs::temp_directory_path() / "semcodec-acceptance").string();
  app.add_option("--only", only, "Run a single criterion (1-9)")->check(CLI::Range(0, 9));
  app.add_option("--workdir", workdir, "Scratch directory");
  CLI11_PARSE(app, argc, argv);
  g_workdir = workdir;
  fs::create_directories(g_workdir);
  torch::set_num_threads(1);

  const std::vector<Criterion> all{
      {1, "frame-rate identities", 1, frame_rates},
      {2, "quantizer oracle", 60, quantizer_oracle},
      {3, "signal round trip", 120, signal_roundtrip},
      {4, "KL diagnostics", 120, kl_diagnostics},
      {5, "SNMI oracles", 60, snmi_oracles},
      {6, "decoupling contract", 300, decoupling},
      {7, "toy training trend", 1800, training_trend},
      {8, "ablation arm parity", 7200, arm_parity},
      {9, "determinism", 0, determinism},
  };

  int failed = 0;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds)
      o.check(false, "took " + fmt("%.0f s", secs) + " over " + fmt("%.0f s", c.budget_seconds));
    std::printf("criterion %d: %s %s (%.1f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
