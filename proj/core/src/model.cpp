#include "semcodec/model.hpp"

#include <torch/torch.h>

#include "semcodec/errors.hpp"

namespace semcodec {

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "full") return DecodeMode::full;
  if (name == "semantic-only" || name == "semantic_only") return DecodeMode::semantic_only;
  throw ConfigError("unknown decode mode '" + name + "' (expected full or semantic-only)");
}

TokenizerModelImpl::TokenizerModelImpl(const RunConfig& cfg, int teacher_dim) : cfg_(cfg) {
  ensure_valid(cfg);
  const auto timing = frame_rate_config(cfg);
  frame_rate_ = timing.frame_rate;
  samples_per_frame_ = timing.samples_per_frame;

  semantic_encoder_ = register_module("semantic_encoder", Encoder(cfg.encoder));
  if (cfg.arms.encoder == "dual") {
    acoustic_encoder_ = register_module("acoustic_encoder", Encoder(cfg.encoder));
  }
  quantizer_ = register_module(
      "quantizer",
      QuantizerStack(cfg.quantizer.codebook_size,
                     std::vector<std::int64_t>(kNumAcousticQuantizers, cfg.quantizer.codebook_size),
                     cfg.encoder.code_dim));
  if (cfg.decoder.type == "mirrored") {
    main_mirrored_ = register_module("main_decoder", MirroredDecoder(cfg.encoder));
  } else {
    main_vocos_ = register_module("main_decoder", VocosDecoder(main_decoder_shape(cfg)));
  }
  if (cfg.arms.aux != "shared") {
    aux_decoder_ = register_module("aux_decoder", VocosDecoder(aux_decoder_shape(cfg)));
    if (cfg.arms.aux == "frozen") {
      for (auto& p : aux_decoder_->parameters()) p.set_requires_grad(false);
    }
  }
  if (cfg.arms.distill == "feature") {
    if (teacher_dim <= 0) throw ConfigError("feature distillation needs a positive teacher dim");
    feature_projection_ = register_module(
        "feature_projection", torch::nn::Linear(cfg.encoder.code_dim, teacher_dim));
  }
}

torch::Tensor TokenizerModelImpl::encode_semantic(const torch::Tensor& wav) {
  return semantic_encoder_->forward(wav);
}

torch::Tensor TokenizerModelImpl::encode_acoustic(const torch::Tensor& wav) {
  if (!acoustic_encoder_) return semantic_encoder_->forward(wav);
  return acoustic_encoder_->forward(wav);
}

SplitQuantized TokenizerModelImpl::quantize(const torch::Tensor& wav,
                                            const QuantizerUpdate* update) {
  auto h_sem = encode_semantic(wav);
  auto h_ac = acoustic_encoder_ ? acoustic_encoder_->forward(wav) : h_sem;
  return split_rvq(h_sem, h_ac, *quantizer_, update);
}

torch::nn::Module& TokenizerModelImpl::main_decoder() {
  if (main_mirrored_) return *main_mirrored_;
  return *main_vocos_;
}

torch::Tensor TokenizerModelImpl::decode_main(const torch::Tensor& z) {
  if (main_mirrored_) return main_mirrored_->forward(z);
  return main_vocos_->forward(z);
}

torch::Tensor TokenizerModelImpl::decode_aux(const torch::Tensor& z_sem) {
  if (!aux_decoder_) return decode_main(z_sem);
  return aux_decoder_->forward(z_sem);
}

torch::Tensor TokenizerModelImpl::project_features(const torch::Tensor& z_sem) {
  if (!feature_projection_) throw ConfigError("model has no feature projection (arms.distill != feature)");
  return feature_projection_->forward(z_sem);
}

TokenSequence TokenizerModelImpl::encode(const Waveform& w) {
  w.validate();
  const Waveform x = w.sample_rate == cfg_.sample_rate ? w : resample(w, cfg_.sample_rate);
  torch::NoGradGuard guard;
  const bool was_training = is_training();
  eval();
  auto q = quantize(to_tensor(x));
  train(was_training);
  return to_token_sequence(q, 0, frame_rate_, *quantizer_);
}

Waveform TokenizerModelImpl::decode(const TokenSequence& t, DecodeMode mode) {
  if (t.frames() == 0) throw ShapeError("cannot decode an empty token sequence");
  auto z = decode_tokens(t, *quantizer_);
  torch::NoGradGuard guard;
  const bool was_training = is_training();
  eval();
  torch::Tensor wav = mode == DecodeMode::full ? decode_main((z.z_sem + z.z_ac).unsqueeze(0))
                                               : decode_aux(z.z_sem.unsqueeze(0));
  train(was_training);
  return from_tensor(wav, cfg_.sample_rate);
}

std::vector<torch::Tensor> TokenizerModelImpl::trainable_parameters() {
  std::vector<torch::Tensor> out;
  for (auto& p : parameters()) {
    if (p.requires_grad()) out.push_back(p);
  }
  return out;
}

}  // namespace semcodec
