#pragma once

#include <string>

#include <torch/nn.h>

#include "semcodec/audio.hpp"
#include "semcodec/config.hpp"
#include "semcodec/nets.hpp"
#include "semcodec/quantize.hpp"

namespace semcodec {

enum class DecodeMode { full, semantic_only };

DecodeMode parse_decode_mode(const std::string& name);

// Encoders, split quantizer, main and auxiliary decoders, and the projection
// used by feature-level distillation. Submodule names match the checkpoint
// components: semantic_encoder, acoustic_encoder, quantizer, main_decoder,
// aux_decoder, feature_projection.
//
// Ablation arms change the wiring:
//   arms.encoder == "single": one encoder feeds both quantizers.
//   arms.aux == "shared": semantic-only decoding uses the main decoder.
//   decoder.type == "mirrored": transposed-conv main decoder.
class TokenizerModelImpl : public torch::nn::Module {
 public:
  // teacher_dim sizes the feature projection (only built for arms.distill == "feature").
  TokenizerModelImpl(const RunConfig& cfg, int teacher_dim);

  // [B, N] -> [B, T, code_dim]
  torch::Tensor encode_semantic(const torch::Tensor& wav);
  torch::Tensor encode_acoustic(const torch::Tensor& wav);

  SplitQuantized quantize(const torch::Tensor& wav, const QuantizerUpdate* update = nullptr);

  // z == z_sem + z_ac, [B, T, d] -> [B, T * samples_per_frame]
  torch::Tensor decode_main(const torch::Tensor& z);
  // Semantic features only; routed through the auxiliary decoder (or the main
  // decoder when arms.aux == "shared").
  torch::Tensor decode_aux(const torch::Tensor& z_sem);
  // [B, T, code_dim] -> [B, T, teacher_dim]
  torch::Tensor project_features(const torch::Tensor& z_sem);

  // Inference on a single clip (resampled to the model rate if needed).
  TokenSequence encode(const Waveform& w);
  Waveform decode(const TokenSequence& t, DecodeMode mode = DecodeMode::full);

  const RunConfig& config() const { return cfg_; }
  double frame_rate() const { return frame_rate_; }
  std::int64_t samples_per_frame() const { return samples_per_frame_; }

  QuantizerStack& quantizer() { return quantizer_; }
  torch::nn::Module& main_decoder();
  // Null when arms.aux == "shared".
  VocosDecoder& aux_decoder() { return aux_decoder_; }
  Encoder& semantic_encoder() { return semantic_encoder_; }
  // Null when arms.encoder == "single".
  Encoder& acoustic_encoder() { return acoustic_encoder_; }
  torch::nn::Linear& feature_projection() { return feature_projection_; }

  // Parameters that the generator optimizer updates. Frozen-arm auxiliary
  // decoder parameters are excluded.
  std::vector<torch::Tensor> trainable_parameters();

 private:
  RunConfig cfg_;
  double frame_rate_;
  std::int64_t samples_per_frame_;
  Encoder semantic_encoder_{nullptr};
  Encoder acoustic_encoder_{nullptr};
  QuantizerStack quantizer_{nullptr};
  VocosDecoder main_vocos_{nullptr};
  MirroredDecoder main_mirrored_{nullptr};
  VocosDecoder aux_decoder_{nullptr};
  torch::nn::Linear feature_projection_{nullptr};
};
TORCH_MODULE(TokenizerModel);

}  // namespace semcodec
