#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcodec/audio.hpp"
#include "semcodec/model.hpp"
#include "semcodec/quantize.hpp"
#include "semcodec/teacher.hpp"
#include "semcodec/train.hpp"

namespace semcodec {

// Collapses runs of equal adjacent ids.
std::vector<std::int32_t> dedup(const std::vector<std::int32_t>& ids);

struct LshOptions {
  int num_hashes = 64;
  std::uint64_t seed = 0x5eed;
};

// MinHash signature over the set of adjacent-id bigrams (a length-1 sequence
// contributes its single id), folded into one bucket id.
std::vector<std::uint64_t> minhash_signature(const std::vector<std::int32_t>& ids,
                                             const LshOptions& opts = {});
std::uint64_t lsh_bucket(const std::vector<std::int32_t>& ids, const LshOptions& opts = {});

// Stream selector: kSemanticStream or an acoustic row 0..6.
inline constexpr int kSemanticStream = -1;
std::vector<std::int32_t> stream_ids(const TokenSequence& t, int stream);
std::string stream_name(int stream);

struct EvalItem {
  TokenSequence tokens;
  std::string transcript;
};
using EvalCorpus = std::vector<EvalItem>;

// I(bucket; label) / H(label) in nats from the empirical contingency table,
// clamped to [0, 1]. Throws RangeError with fewer than two label classes.
double normalized_mutual_information(const std::vector<std::uint64_t>& buckets,
                                     const std::vector<std::string>& labels);

// Dedup, bucket and score one stream across the corpus.
double snmi(const EvalCorpus& corpus, int stream, const LshOptions& opts = {});
// Mean acoustic-stream SNMI over semantic SNMI. Throws RangeError when the
// semantic SNMI is 0.
double snmi_ratio(const EvalCorpus& corpus, const LshOptions& opts = {});

struct CollisionAudit {
  std::size_t distinct_sequences = 0;
  std::size_t buckets = 0;
  std::size_t colliding_pairs = 0;  // distinct sequences sharing a bucket
};
CollisionAudit audit_collisions(const std::vector<std::vector<std::int32_t>>& sequences,
                                const LshOptions& opts = {});

inline constexpr double kSiSnrCap = 60.0;

// Scale-invariant SNR in dB after truncation to the shorter signal and mean
// removal, capped at kSiSnrCap. Throws RangeError for a zero-energy reference.
double si_snr(const std::vector<float>& reference, const std::vector<float>& estimate);
double si_snr(const Waveform& reference, const Waveform& estimate);

// steps x (1 semantic + 7 acoustic) ids, row-major. The semantic column holds
// frame s at step s; acoustic columns hold frame s - 1. Staggered cells are pad.
struct DelayedTokenGrid {
  std::int64_t steps = 0;
  std::int32_t pad = 0;
  double frame_rate = 0.0;
  std::int64_t semantic_codebook_size = 0;
  std::vector<std::int64_t> acoustic_codebook_sizes;
  std::vector<std::int32_t> cells;

  static constexpr int kColumns = 1 + kNumAcousticQuantizers;
  std::int32_t at(std::int64_t step, int column) const {
    return cells[static_cast<std::size_t>(step * kColumns + column)];
  }
};

// pad == max codebook size (one past the last valid id).
DelayedTokenGrid apply_delay(const TokenSequence& t);
// Throws FormatError when pad appears in a content cell, a staggered cell is
// not pad, or the grid has no frames.
TokenSequence invert_delay(const DelayedTokenGrid& g);

struct ClipRef {
  std::string id;
  std::string speaker;
  std::string path;
};

struct EmbeddingRecord {
  std::string id;
  std::string speaker;
  std::string stream;  // semantic | acoustic
  std::vector<double> vector;
};

// Time mean of a [T, d] matrix.
std::vector<double> time_mean(const torch::Tensor& frames);

// Two records per clip: the time-mean of the quantized semantic and acoustic
// embeddings.
std::vector<EmbeddingRecord> export_embeddings(TokenizerModelImpl& model,
                                               const std::vector<ClipRef>& clips);
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

struct EvalOptions {
  std::vector<std::string> metrics{"snmi", "si_snr", "mel_distance"};
  LshOptions lsh;
  std::filesystem::path plugins;  // optional plugin registry (JSON)
};

// Per-metric values over the manifest plus the config digest, checkpoint
// digest and LSH collision audit.
nlohmann::json evaluate(TokenizerModelImpl& model, const Manifest& manifest,
                        const EvalOptions& opts, const std::string& checkpoint_digest = "");

// Gaussian statistics of teacher features on the originals, on semantic-only
// reconstructions and (feature arm) on projected semantic features, with the
// closed-form KL values between them.
nlohmann::json kl_report(TokenizerModelImpl& model, Teacher& teacher, const Manifest& manifest,
                         const std::string& checkpoint_digest = "");

}  // namespace semcodec
