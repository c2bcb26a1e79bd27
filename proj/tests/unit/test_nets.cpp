#include <gtest/gtest.h>
#include <torch/torch.h>

#include "helpers.hpp"
#include "semcodec/digest.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/model.hpp"
#include "semcodec/nets.hpp"

using namespace semcodec;
using semcodec::testing::tiny_config;

TEST(Nets, WeightNormIsDirectionTimesGain) {
  torch::manual_seed(0);
  WeightNormConv1d conv(3, 4, 5);
  auto w = conv->weight();
  auto norms = w.pow(2).sum({1, 2}).sqrt();
  auto g = conv->named_parameters()["g"];
  ASSERT_TRUE(g.defined());
  EXPECT_TRUE(torch::allclose(norms, g.reshape({-1}).abs(), 1e-5, 1e-6));
}

TEST(Nets, EncoderFrameCount) {
  auto cfg = tiny_config();
  torch::manual_seed(0);
  Encoder enc(cfg.encoder);
  EXPECT_EQ(enc->hop(), 640);
  for (std::int64_t n : {640, 1000, 6400, 6500}) {
    auto h = enc->forward(torch::randn({2, n}));
    EXPECT_EQ(h.size(1), n / 640) << n;
    EXPECT_EQ(h.size(2), cfg.encoder.code_dim);
  }
  EXPECT_THROW(enc->forward(torch::randn({1, 639})), ShapeError);
}

TEST(Nets, VocosOutputLength) {
  for (const char* preset : {"toy-25hz", "toy-12.5hz", "toy-6.25hz"}) {
    auto cfg = tiny_config(preset);
    torch::manual_seed(0);
    VocosDecoder dec(main_decoder_shape(cfg));
    auto y = dec->forward(torch::randn({2, 3, cfg.encoder.code_dim}));
    EXPECT_EQ(y.size(1), 3 * frame_rate_config(cfg).samples_per_frame) << preset;
    EXPECT_TRUE(torch::isfinite(y).all().item<bool>());
  }
}

TEST(Nets, MirroredOutputLength) {
  auto cfg = tiny_config("toy-12.5hz");
  torch::manual_seed(0);
  MirroredDecoder dec(cfg.encoder);
  auto y = dec->forward(torch::randn({1, 4, cfg.encoder.code_dim}));
  EXPECT_EQ(y.size(1), 4 * 1280);
  EXPECT_THROW(dec->forward(torch::randn({1, 0, cfg.encoder.code_dim})), ShapeError);
}

TEST(Nets, AuxDecoderMuchSmallerAtReferenceScale) {
  auto cfg = resolve_config({{"preset", "25hz"}});
  VocosDecoder main(main_decoder_shape(cfg));
  VocosDecoder aux(aux_decoder_shape(cfg));
  EXPECT_LT(static_cast<double>(parameter_count(*aux)), 0.15 * parameter_count(*main));
}

TEST(Model, DualEncodersAreIndependent) {
  auto cfg = tiny_config();
  torch::manual_seed(1);
  TokenizerModel m(cfg, 64);
  ASSERT_TRUE(m->acoustic_encoder());
  auto wav = torch::randn({1, 3200});
  auto h = m->encode_semantic(wav);
  h.sum().backward();
  for (auto& p : m->acoustic_encoder()->parameters()) {
    EXPECT_FALSE(p.grad().defined() && p.grad().abs().sum().item<double>() != 0.0);
  }
}

TEST(Model, SingleEncoderSharesLatent) {
  auto cfg = tiny_config();
  cfg.arms.encoder = "single";
  torch::manual_seed(1);
  TokenizerModel m(cfg, 64);
  EXPECT_FALSE(m->acoustic_encoder());
  auto wav = torch::randn({1, 3200});
  EXPECT_TRUE(torch::equal(m->encode_semantic(wav), m->encode_acoustic(wav)));
}

TEST(Model, ArmsChangeRegisteredComponents) {
  auto cfg = tiny_config();
  cfg.arms.aux = "shared";
  cfg.arms.distill = "feature";
  cfg.decoder.type = "mirrored";
  TokenizerModel m(cfg, 64);
  auto children = m->named_children();
  EXPECT_FALSE(children.contains("aux_decoder"));
  EXPECT_TRUE(children.contains("feature_projection"));
  EXPECT_TRUE(children.contains("main_decoder"));
  EXPECT_EQ(m->project_features(torch::randn({1, 2, cfg.encoder.code_dim})).size(2), 64);
}

TEST(Model, FrozenAuxExcludedFromTrainables) {
  auto cfg = tiny_config();
  cfg.arms.aux = "frozen";
  TokenizerModel m(cfg, 64);
  std::size_t aux = m->aux_decoder()->parameters().size();
  ASSERT_GT(aux, 0u);
  EXPECT_EQ(m->trainable_parameters().size() + aux, m->parameters().size());
}

TEST(Model, DeterministicUnderSeed) {
  auto cfg = tiny_config();
  torch::manual_seed(5);
  TokenizerModel a(cfg, 64);
  torch::manual_seed(5);
  TokenizerModel b(cfg, 64);
  EXPECT_EQ(parameter_digest(*a), parameter_digest(*b));
  auto wav = torch::randn({1, 6400});
  auto sa = a->quantize(wav);
  auto sb = b->quantize(wav);
  EXPECT_TRUE(torch::equal(sa.semantic_ids, sb.semantic_ids));
  EXPECT_TRUE(torch::equal(a->decode_main(sa.z_sem + sa.z_ac), b->decode_main(sb.z_sem + sb.z_ac)));
}

TEST(Model, EncodeDecodeLengths) {
  auto cfg = tiny_config();
  torch::manual_seed(2);
  TokenizerModel m(cfg, 64);
  Waveform w;
  w.samples.assign(16000 + 123, 0.1f);
  for (std::size_t i = 0; i < w.samples.size(); ++i) w.samples[i] = 0.3f * std::sin(0.05f * i);
  auto t = m->encode(w);
  EXPECT_EQ(t.frames(), 25);
  EXPECT_EQ(t.frame_rate, 25.0);
  for (auto mode : {DecodeMode::full, DecodeMode::semantic_only}) {
    auto y = m->decode(t, mode);
    EXPECT_EQ(y.samples.size(), 25u * 640);
    EXPECT_NO_THROW(y.validate());
  }
  EXPECT_EQ(parse_decode_mode("semantic-only"), DecodeMode::semantic_only);
  EXPECT_THROW(parse_decode_mode("acoustic"), ConfigError);
}

TEST(Model, InvalidConfigRejected) {
  auto cfg = tiny_config();
  cfg.decoder.upsample_factor = 4;
  EXPECT_THROW(TokenizerModel(cfg, 64), ConfigError);
}
