#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <torch/nn/module.h>
#include <torch/types.h>

namespace semcodec {

inline constexpr int kNumAcousticQuantizers = 7;

// Learnable code vectors with running EMA statistics and per-window usage.
// Tensors are shared with any module that registers them as buffers, so all
// updates happen in place.
struct Codebook {
  torch::Tensor entries;          // [K, d]
  torch::Tensor ema_cluster_size; // [K]
  torch::Tensor ema_embed_sum;    // [K, d]
  torch::Tensor usage;            // [K] int64, assignments in the current window
  torch::Tensor idle_windows;     // [K] int64, consecutive windows below the share threshold
  torch::Tensor window_step;      // [] int64, updates seen in the current window
  torch::Tensor initialized;      // [] bool

  Codebook() = default;
  Codebook(std::int64_t size, std::int64_t dim);
  static Codebook from_entries(const torch::Tensor& entries);

  std::int64_t size() const { return entries.size(0); }
  std::int64_t dim() const { return entries.size(1); }
};

struct CodebookUpdateOptions {
  double decay = 0.99;
  double epsilon = 1e-5;
  int kmeans_iters = 10;
  int window_steps = 100;       // updates per usage window
  double dead_share = 1e-6;     // usage share below which a code counts as idle
  int dead_windows = 2;         // idle windows before a code is re-seeded
};

struct VqResult {
  torch::Tensor ids;        // int64 [...]
  torch::Tensor quantized;  // [..., d], detached codebook rows
};

// Nearest code by squared Euclidean distance, lowest index on ties.
// frames: [..., d]. Never propagates gradient.
VqResult vq_encode(const torch::Tensor& frames, const Codebook& cb);

struct RvqResult {
  torch::Tensor ids;                       // int64 [..., n]
  torch::Tensor quantized_sum;             // [..., d]
  std::vector<torch::Tensor> residuals;    // input to stage j (differentiable w.r.t. frames)
  std::vector<torch::Tensor> stage_quantized;  // selected entries at stage j (detached)
};

RvqResult rvq_encode(const torch::Tensor& frames, const std::vector<Codebook>& stages);

// Forward value equals post_q; gradient w.r.t. pre_q is the identity.
torch::Tensor straight_through(const torch::Tensor& pre_q, const torch::Tensor& post_q);

// Sum over stages of mean squared deviation (mean over every element of the
// stage). post_q is detached, so only the encoder side receives gradient.
torch::Tensor commitment_loss(const std::vector<torch::Tensor>& pre_q,
                              const std::vector<torch::Tensor>& post_q);

// EMA codebook learning. The first call initializes entries by k-means on the
// batch. frames: [N, d] (detached), ids: [N]. Empty batch is a no-op; decay >= 1
// freezes the entries.
void codebook_update(Codebook& cb, const torch::Tensor& frames, const torch::Tensor& ids,
                     const CodebookUpdateOptions& opts, std::mt19937_64& rng);

// Per-frame semantic id plus kNumAcousticQuantizers acoustic ids.
struct TokenSequence {
  double frame_rate = 0.0;
  std::int64_t semantic_codebook_size = 0;
  std::vector<std::int64_t> acoustic_codebook_sizes;  // kNumAcousticQuantizers
  std::vector<std::int32_t> semantic_ids;             // [T]
  std::vector<std::int32_t> acoustic_ids;             // row-major [T, kNumAcousticQuantizers]

  std::int64_t frames() const { return static_cast<std::int64_t>(semantic_ids.size()); }
  std::int32_t acoustic(std::int64_t t, int k) const {
    return acoustic_ids[static_cast<std::size_t>(t * kNumAcousticQuantizers + k)];
  }
  // Throws RangeError / ShapeError.
  void validate() const;

  bool operator==(const TokenSequence&) const = default;
};

inline constexpr std::uint32_t kTokenFormatVersion = 1;

// Binary layout (little endian): "SCTK", u32 version, f64 frame_rate,
// u32 semantic size, 7 x u32 acoustic sizes, u64 T, then T rows of 8 x i32
// (semantic id followed by the 7 acoustic ids).
void write_tokens(const std::filesystem::path& path, const TokenSequence& t);
TokenSequence read_tokens(const std::filesystem::path& path);
std::string serialize_tokens(const TokenSequence& t);
TokenSequence deserialize_tokens(const std::string& bytes);

// JSON lines: a header object, then one {"t", "semantic", "acoustic"} object per frame.
std::string tokens_to_jsonl(const TokenSequence& t);
TokenSequence tokens_from_jsonl(const std::string& text);

// Q_sem plus the acoustic RVQ stack. Codebook state lives in buffers so it is
// carried by checkpoints.
class QuantizerStackImpl : public torch::nn::Module {
 public:
  QuantizerStackImpl(std::int64_t semantic_size, std::vector<std::int64_t> acoustic_sizes,
                     std::int64_t dim);

  Codebook& semantic() { return semantic_; }
  const Codebook& semantic() const { return semantic_; }
  std::vector<Codebook>& acoustic() { return acoustic_; }
  const std::vector<Codebook>& acoustic() const { return acoustic_; }
  std::int64_t dim() const { return dim_; }

 private:
  void register_codebook(const std::string& prefix, Codebook& cb);

  Codebook semantic_;
  std::vector<Codebook> acoustic_;
  std::int64_t dim_;
};
TORCH_MODULE(QuantizerStack);

struct SplitQuantized {
  torch::Tensor semantic_ids;  // int64 [B, T]
  torch::Tensor acoustic_ids;  // int64 [B, T, 7]
  torch::Tensor z_sem;         // straight-through [B, T, d]
  torch::Tensor z_ac;          // straight-through [B, T, d]
  std::vector<torch::Tensor> pre_q;   // semantic stage first, then acoustic stages
  std::vector<torch::Tensor> post_q;
};

struct QuantizerUpdate {
  CodebookUpdateOptions options;
  std::mt19937_64* rng = nullptr;
};

// h_sem, h_ac: [B, T, d] or [T, d]. When `update` is given, the codebooks take
// an EMA step with this batch's assignments after the ids are computed.
SplitQuantized split_rvq(const torch::Tensor& h_sem, const torch::Tensor& h_ac,
                         QuantizerStackImpl& q, const QuantizerUpdate* update = nullptr);

struct DecodedTokens {
  torch::Tensor z_sem;  // [T, d]
  torch::Tensor z_ac;   // [T, d]
};

DecodedTokens decode_tokens(const TokenSequence& t, const QuantizerStackImpl& q);

// Batch item b of a SplitQuantized result as a TokenSequence.
TokenSequence to_token_sequence(const SplitQuantized& s, std::int64_t b, double frame_rate,
                                const QuantizerStackImpl& q);

}  // namespace semcodec
