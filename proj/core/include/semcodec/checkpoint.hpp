#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <torch/optim.h>

#include "semcodec/config.hpp"
#include "semcodec/losses.hpp"
#include "semcodec/model.hpp"

namespace semcodec {

struct TrainerState;

inline constexpr std::int64_t kCheckpointVersion = 1;

// Archive layout: version, config (resolved JSON), teacher_dim, teacher_digest,
// one sub-archive per component (semantic_encoder, acoustic_encoder, quantizer,
// main_decoder, aux_decoder, feature_projection, discriminators), and for
// training checkpoints optimizer_g, optimizer_d, rng, torch_rng, step, epoch, cursor.
struct CheckpointInfo {
  std::int64_t version = 0;
  RunConfig config;
  int teacher_dim = 0;
  std::string teacher_digest;
  bool has_training_state = false;
};

struct TrainingSnapshot {
  DiscriminatorsImpl* discriminators = nullptr;
  torch::optim::Optimizer* generator_optimizer = nullptr;
  torch::optim::Optimizer* discriminator_optimizer = nullptr;
  const TrainerState* state = nullptr;
  const std::mt19937_64* rng = nullptr;
};

// Writes atomically (temp file + rename). `training` may be null for an
// inference-only checkpoint.
void write_checkpoint(const std::filesystem::path& path, TokenizerModelImpl& model,
                      int teacher_dim, const std::string& teacher_digest,
                      const TrainingSnapshot* training = nullptr);

// Throws IoError for a missing file and CheckpointVersionError for an unknown version.
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

// Inference-only load: builds the model from the stored config and restores
// the generator components; discriminators and optimizer state are ignored.
TokenizerModel load_model(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

struct TrainingRestore {
  DiscriminatorsImpl* discriminators = nullptr;
  torch::optim::Optimizer* generator_optimizer = nullptr;
  torch::optim::Optimizer* discriminator_optimizer = nullptr;
  TrainerState* state = nullptr;
  std::mt19937_64* rng = nullptr;
};

// Restores everything needed to resume training into existing objects,
// including the global torch RNG. Throws Error when the checkpoint holds no
// training state.
void load_training_checkpoint(const std::filesystem::path& path, TokenizerModelImpl& model,
                              const TrainingRestore& restore);

}  // namespace semcodec
