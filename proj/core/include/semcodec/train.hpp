#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>
#include <torch/optim.h>

#include "semcodec/audio.hpp"
#include "semcodec/config.hpp"
#include "semcodec/losses.hpp"
#include "semcodec/model.hpp"
#include "semcodec/teacher.hpp"

namespace semcodec {

struct ManifestRecord {
  std::string path;        // resolved against the manifest directory when relative
  std::string transcript;
  double duration = 0.0;   // seconds
  std::string speaker;     // optional
  std::string id;          // optional; defaults to the file stem
};

struct Manifest {
  std::vector<ManifestRecord> records;
};

// JSON lines with {path, transcript, duration[, speaker, id]}. Throws IoError
// for missing audio and FormatError for malformed lines or durations <= 0.
Manifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

struct CropResult {
  Waveform audio;
  std::int64_t offset = 0;
  bool padded = false;     // clip was shorter than the segment and zero-padded on the right
};

// Exactly round(seconds * rate) samples starting at a uniform offset.
CropResult crop_segment(const Waveform& w, double seconds, std::mt19937_64& rng);

// Visits every index once per epoch in a seeded order that depends only on
// (seed, epoch), so (epoch, cursor) fully describes its state.
class EpochSampler {
 public:
  EpochSampler(std::size_t size, std::uint64_t seed);
  std::size_t next();
  std::int64_t epoch() const { return epoch_; }
  std::size_t cursor() const { return cursor_; }
  void restore(std::int64_t epoch, std::size_t cursor);
  const std::vector<std::size_t>& order() const { return order_; }

 private:
  void shuffle();
  std::size_t size_;
  std::uint64_t seed_;
  std::int64_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

// Keys: loss_t, loss_f_l1, loss_f_l2, loss_f, loss_g, loss_feat, loss_com,
// loss_distill, loss_total, loss_d.
struct StepReport {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::map<std::string, double> losses;

  nlohmann::json to_json() const;
  bool operator==(const StepReport&) const = default;
};

struct TrainerState {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  std::size_t cursor = 0;
};

class Trainer {
 public:
  // Builds the teacher from the config when none is given.
  explicit Trainer(const RunConfig& cfg, std::shared_ptr<Teacher> teacher = nullptr);

  void set_manifest(Manifest m);
  const Manifest& manifest() const { return manifest_; }

  // One generator step and one discriminator step over accum_steps micro-batches
  // drawn from the manifest.
  StepReport step();
  // Same, over explicit micro-batches ([B, N] each).
  StepReport train_step(const std::vector<torch::Tensor>& micro_batches);
  StepReport train_step(const torch::Tensor& batch) {
    return train_step(std::vector<torch::Tensor>{batch});
  }

  // Runs until `steps` more steps are done (or the configured budget), appending
  // every report to the log. Returns the reports of this call.
  std::vector<StepReport> run(std::int64_t steps,
                              const std::function<void(const StepReport&)>& on_step = {});

  // [batch_size, segment] from the manifest.
  torch::Tensor next_batch();

  // Relative teacher feature change under RMS-1e-3 noise on `wav`; diagnostic only.
  double teacher_robustness(const torch::Tensor& wav);

  void save_checkpoint(const std::filesystem::path& path);
  void load_checkpoint(const std::filesystem::path& path);

  TokenizerModel& model() { return model_; }
  Discriminators& discriminators() { return discriminators_; }
  Teacher& teacher() { return *teacher_; }
  const RunConfig& config() const { return cfg_; }
  TrainerState state() const;
  // Updates per dead-code usage window: the configured value, or one pass
  // over the manifest when it is 0.
  int dead_code_window() const;
  std::mt19937_64& rng() { return rng_; }
  torch::optim::Optimizer& generator_optimizer() { return *opt_g_; }
  torch::optim::Optimizer& discriminator_optimizer() { return *opt_d_; }

  // Path of the JSON-lines training log (out_dir/train_log.jsonl).
  std::filesystem::path log_path() const;
  // Empty until a checkpoint has been written or loaded.
  const std::filesystem::path& last_checkpoint() const { return last_checkpoint_; }

 private:
  const Waveform& audio(std::size_t index);
  void append_log(const nlohmann::json& record);

  RunConfig cfg_;
  std::shared_ptr<Teacher> teacher_;
  TokenizerModel model_{nullptr};
  Discriminators discriminators_{nullptr};
  std::unique_ptr<torch::optim::AdamW> opt_g_;
  std::unique_ptr<torch::optim::AdamW> opt_d_;
  std::mt19937_64 rng_;
  Manifest manifest_;
  std::unique_ptr<EpochSampler> sampler_;
  std::unordered_map<std::size_t, Waveform> cache_;
  std::int64_t step_ = 0;
  std::filesystem::path last_checkpoint_;
  bool robustness_logged_ = false;
};

}  // namespace semcodec
