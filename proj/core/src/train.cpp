#include "semcodec/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <torch/torch.h>

#include "semcodec/checkpoint.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/signal.hpp"

namespace semcodec {

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest not found: " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    ManifestRecord r;
    try {
      r.path = j.at("path").get<std::string>();
      r.transcript = j.value("transcript", std::string());
      r.duration = j.at("duration").get<double>();
      r.speaker = j.value("speaker", std::string());
      r.id = j.value("id", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!(r.duration > 0.0)) throw FormatError(where + ": duration must be positive");
    std::filesystem::path p(r.path);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::exists(p)) throw IoError(where + ": audio not found: " + p.string());
    r.path = p.string();
    if (r.id.empty()) r.id = p.stem().string();
    m.records.push_back(std::move(r));
  }
  if (m.records.empty()) throw FormatError("manifest " + path.string() + " has no records");
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : m.records) {
    nlohmann::json j{{"path", r.path}, {"transcript", r.transcript}, {"duration", r.duration}};
    if (!r.speaker.empty()) j["speaker"] = r.speaker;
    if (!r.id.empty()) j["id"] = r.id;
    out << j.dump() << '\n';
  }
}

CropResult crop_segment(const Waveform& w, double seconds, std::mt19937_64& rng) {
  const auto n = static_cast<std::int64_t>(std::llround(seconds * w.sample_rate));
  if (n <= 0) throw RangeError("segment length must be positive");
  CropResult r;
  r.audio.sample_rate = w.sample_rate;
  const auto len = static_cast<std::int64_t>(w.samples.size());
  if (len <= n) {
    r.padded = len < n;
    r.audio.samples = w.samples;
    r.audio.samples.resize(static_cast<std::size_t>(n), 0.0f);
    return r;
  }
  std::uniform_int_distribution<std::int64_t> dist(0, len - n);
  r.offset = dist(rng);
  r.audio.samples.assign(w.samples.begin() + r.offset, w.samples.begin() + r.offset + n);
  return r;
}

EpochSampler::EpochSampler(std::size_t size, std::uint64_t seed) : size_(size), seed_(seed) {
  if (size == 0) throw RangeError("sampler needs at least one item");
  shuffle();
}

void EpochSampler::shuffle() {
  order_.resize(size_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::mt19937_64 g(seed_ ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch_ + 1)));
  std::shuffle(order_.begin(), order_.end(), g);
}

std::size_t EpochSampler::next() {
  if (cursor_ == size_) {
    ++epoch_;
    cursor_ = 0;
    shuffle();
  }
  return order_[cursor_++];
}

void EpochSampler::restore(std::int64_t epoch, std::size_t cursor) {
  if (cursor > size_) throw RangeError("sampler cursor out of range");
  epoch_ = epoch;
  cursor_ = cursor;
  shuffle();
}

nlohmann::json StepReport::to_json() const {
  nlohmann::json j{{"type", "step"}, {"step", step}, {"epoch", epoch}};
  for (const auto& [k, v] : losses) j[k] = v;
  return j;
}

Trainer::Trainer(const RunConfig& cfg, std::shared_ptr<Teacher> teacher)
    : cfg_(cfg), teacher_(std::move(teacher)), rng_(cfg.seed) {
  ensure_valid(cfg_);
  torch::set_num_threads(cfg_.threads);
  torch::manual_seed(cfg_.seed);
  if (!teacher_) teacher_ = make_teacher(cfg_.teacher);
  model_ = TokenizerModel(cfg_, teacher_->dim());
  discriminators_ = Discriminators(cfg_.discriminator);
  const auto& t = cfg_.train;
  opt_g_ = std::make_unique<torch::optim::AdamW>(
      model_->trainable_parameters(),
      torch::optim::AdamWOptions(t.lr).betas({t.beta1, t.beta2}).weight_decay(t.weight_decay));
  opt_d_ = std::make_unique<torch::optim::AdamW>(
      discriminators_->parameters(),
      torch::optim::AdamWOptions(t.disc_lr).betas({t.beta1, t.beta2}).weight_decay(t.weight_decay));
  model_->train();
  discriminators_->train();
  if (!t.manifest.empty()) set_manifest(load_manifest(t.manifest));
}

void Trainer::set_manifest(Manifest m) {
  if (m.records.empty()) throw FormatError("manifest has no records");
  manifest_ = std::move(m);
  cache_.clear();
  sampler_ = std::make_unique<EpochSampler>(manifest_.records.size(), cfg_.seed);
}

const Waveform& Trainer::audio(std::size_t index) {
  auto it = cache_.find(index);
  if (it != cache_.end()) return it->second;
  auto w = load_audio(manifest_.records.at(index).path);
  if (w.sample_rate != cfg_.sample_rate) w = resample(w, cfg_.sample_rate);
  return cache_.emplace(index, std::move(w)).first->second;
}

torch::Tensor Trainer::next_batch() {
  if (!sampler_) throw ConfigError("trainer has no manifest (set train.manifest)");
  std::vector<torch::Tensor> rows;
  for (int b = 0; b < cfg_.train.batch_size; ++b) {
    const auto idx = sampler_->next();
    auto crop = crop_segment(audio(idx), cfg_.train.segment_seconds, rng_);
    rows.push_back(to_tensor(crop.audio).squeeze(0));
  }
  return torch::stack(rows);
}

int Trainer::dead_code_window() const {
  if (cfg_.quantizer.dead_code_window_steps > 0) return cfg_.quantizer.dead_code_window_steps;
  const auto items = static_cast<std::int64_t>(cfg_.train.batch_size) * cfg_.train.accum_steps;
  const auto records = static_cast<std::int64_t>(std::max<std::size_t>(manifest_.records.size(), 1));
  return static_cast<int>(std::max<std::int64_t>(1, (records + items - 1) / items));
}

TrainerState Trainer::state() const {
  TrainerState s;
  s.step = step_;
  if (sampler_) {
    s.epoch = sampler_->epoch();
    s.cursor = sampler_->cursor();
  }
  return s;
}

std::filesystem::path Trainer::log_path() const {
  return std::filesystem::path(cfg_.train.out_dir) / "train_log.jsonl";
}

void Trainer::append_log(const nlohmann::json& record) {
  const auto p = log_path();
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::app);
  if (!out) throw IoError("cannot append to training log " + p.string());
  out << record.dump() << '\n';
}

double Trainer::teacher_robustness(const torch::Tensor& wav) {
  torch::NoGradGuard guard;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(cfg_.seed + 1);
  auto noise = torch::randn(wav.sizes(), gen, torch::TensorOptions().dtype(wav.dtype()));
  noise = noise * (1e-3 / noise.pow(2).mean().sqrt().clamp_min(1e-12));
  auto clean = teacher_->encode(wav);
  auto noisy = teacher_->encode(wav + noise);
  return ((noisy - clean).norm() / clean.norm().clamp_min(1e-12)).item<double>();
}

StepReport Trainer::train_step(const std::vector<torch::Tensor>& micro_batches) {
  if (micro_batches.empty()) throw ShapeError("train_step needs at least one batch");
  model_->train();
  discriminators_->train();
  const double scale = 1.0 / static_cast<double>(micro_batches.size());
  const auto& w = cfg_.weights;
  const auto& arms = cfg_.arms;

  QuantizerUpdate update;
  update.options.decay = cfg_.quantizer.ema_decay;
  update.options.kmeans_iters = cfg_.quantizer.kmeans_iters;
  update.options.window_steps = dead_code_window();
  update.options.dead_share = cfg_.quantizer.dead_code_share;
  update.options.dead_windows = cfg_.quantizer.dead_code_windows;
  update.rng = &rng_;

  std::map<std::string, double> sums;
  std::vector<torch::Tensor> fakes;
  opt_g_->zero_grad();
  for (const auto& raw : micro_batches) {
    auto x = raw.dim() == 1 ? raw.unsqueeze(0) : raw;
    auto q = model_->quantize(x, &update);
    auto x_hat = model_->decode_main(q.z_sem + q.z_ac);
    auto [xr, xh] = truncate_pair(x, x_hat);

    LossParts parts;
    parts.time = time_loss(xr, xh);
    auto mel = multiscale_mel_loss(xr, xh, cfg_.sample_rate);
    parts.mel_l1 = mel.l1;
    parts.mel_l2 = mel.l2;
    auto real = discriminators_->forward(xr);
    auto fake = discriminators_->forward(xh);
    parts.gen = gen_hinge_loss(fake);
    parts.feat = feature_matching_loss(real, fake);
    parts.commit = commitment_loss(q.pre_q, q.post_q);
    if (arms.distill == "recon") {
      parts.distill = distill_recon(*teacher_, xr, model_->decode_aux(q.z_sem));
    } else if (arms.distill == "feature") {
      torch::Tensor target;
      {
        torch::NoGradGuard guard;
        target = teacher_->encode(xr);
      }
      parts.distill = distill_feature(model_->project_features(q.z_sem), target,
                                      teacher_->frame_rate(), model_->frame_rate());
    }

    torch::Tensor total;
    try {
      total = total_generator_loss(parts, w);
    } catch (const NonFiniteLoss& e) {
      const auto note = last_checkpoint_.empty()
                            ? std::string("no checkpoint written yet")
                            : "last good checkpoint: " + last_checkpoint_.string();
      throw NonFiniteLoss(e.component(), e.value(), note + " (step " + std::to_string(step_ + 1) + ")");
    }
    (total * scale).backward();

    for (const auto& [k, v] : parts.values()) sums[k] += v * scale;
    sums["loss_total"] += total.item<double>() * scale;
    fakes.push_back(xh.detach());
  }
  if (cfg_.train.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(model_->trainable_parameters(), cfg_.train.grad_clip);
  }
  opt_g_->step();

  opt_d_->zero_grad();
  for (std::size_t i = 0; i < micro_batches.size(); ++i) {
    auto x = micro_batches[i].dim() == 1 ? micro_batches[i].unsqueeze(0) : micro_batches[i];
    auto [xr, xh] = truncate_pair(x, fakes[i]);
    auto loss_d = disc_hinge_loss(discriminators_->forward(xr), discriminators_->forward(xh));
    const double value = loss_d.item<double>();
    if (!std::isfinite(value)) throw NonFiniteLoss("discriminator", value);
    (loss_d * scale).backward();
    sums["loss_d"] += value * scale;
  }
  if (cfg_.train.grad_clip > 0.0) {
    torch::nn::utils::clip_grad_norm_(discriminators_->parameters(), cfg_.train.grad_clip);
  }
  opt_d_->step();

  ++step_;
  StepReport r;
  r.step = step_;
  r.epoch = sampler_ ? sampler_->epoch() : 0;
  r.losses = std::move(sums);
  r.losses["loss_f"] = r.losses["loss_f_l1"] + r.losses["loss_f_l2"];
  return r;
}

StepReport Trainer::step() {
  std::vector<torch::Tensor> batches;
  for (int i = 0; i < cfg_.train.accum_steps; ++i) batches.push_back(next_batch());
  if (!robustness_logged_) {
    append_log({{"type", "diagnostic"},
                {"name", "teacher_robustness"},
                {"noise_rms", 1e-3},
                {"relative_change", teacher_robustness(batches.front())}});
    robustness_logged_ = true;
  }
  auto r = train_step(batches);
  if (r.step % cfg_.train.log_every == 0) append_log(r.to_json());
  return r;
}

std::vector<StepReport> Trainer::run(std::int64_t steps,
                                     const std::function<void(const StepReport&)>& on_step) {
  std::vector<StepReport> out;
  const auto per_epoch =
      sampler_ ? static_cast<std::int64_t>(manifest_.records.size()) : std::int64_t{1};
  const auto batch_items = static_cast<std::int64_t>(cfg_.train.batch_size) * cfg_.train.accum_steps;
  std::int64_t budget = (cfg_.train.epochs * per_epoch + batch_items - 1) / batch_items;
  if (cfg_.train.max_steps > 0) budget = std::min(budget, cfg_.train.max_steps);
  const std::int64_t target = std::min(step_ + steps, budget);
  while (step_ < target) {
    out.push_back(step());
    if (on_step) on_step(out.back());
    if (cfg_.train.checkpoint_every > 0 && step_ % cfg_.train.checkpoint_every == 0) {
      save_checkpoint(std::filesystem::path(cfg_.train.out_dir) /
                      ("step_" + std::to_string(step_) + ".ckpt"));
    }
  }
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) {
  const auto s = state();
  TrainingSnapshot snap;
  snap.discriminators = discriminators_.get();
  snap.generator_optimizer = opt_g_.get();
  snap.discriminator_optimizer = opt_d_.get();
  snap.state = &s;
  snap.rng = &rng_;
  write_checkpoint(path, *model_, teacher_->dim(), teacher_->digest(), &snap);
  last_checkpoint_ = path;
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  auto info = read_checkpoint_info(path);
  if (info.teacher_digest != teacher_->digest()) {
    throw ConfigError("checkpoint was trained against a different teacher (digest " +
                      info.teacher_digest + ")");
  }
  TrainerState s;
  TrainingRestore r;
  r.discriminators = discriminators_.get();
  r.generator_optimizer = opt_g_.get();
  r.discriminator_optimizer = opt_d_.get();
  r.state = &s;
  r.rng = &rng_;
  load_training_checkpoint(path, *model_, r);
  step_ = s.step;
  if (sampler_) sampler_->restore(s.epoch, s.cursor);
  robustness_logged_ = true;
  last_checkpoint_ = path;
}

}  // namespace semcodec
