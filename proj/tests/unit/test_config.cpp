#include <algorithm>
#include <fstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "semcodec/config.hpp"
#include "semcodec/errors.hpp"

using namespace semcodec;

namespace {

std::int64_t product(const std::vector<int>& v) {
  std::int64_t p = 1;
  for (int x : v) p *= x;
  return p;
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

}  // namespace

TEST(Config, PresetFrameRates) {
  const std::vector<std::pair<std::string, double>> expected{
      {"25hz", 25.0}, {"12.5hz", 12.5}, {"6.25hz", 6.25}};
  for (const auto& [name, rate] : expected) {
    for (const auto& prefix : {"", "toy-"}) {
      auto cfg = resolve_config({{"preset", prefix + name}});
      auto f = frame_rate_config(cfg);
      EXPECT_EQ(f.frame_rate, rate) << prefix << name;
      EXPECT_EQ(product(f.conv_strides) * 2 * rate, 16000.0);
      EXPECT_EQ(rate * f.upsample_factor * 320, 16000.0);
      EXPECT_TRUE(validate(cfg).empty()) << prefix << name;
    }
  }
}

TEST(Config, CodebookSizesPerRate) {
  EXPECT_EQ(resolve_config({{"preset", "25hz"}}).quantizer.codebook_size, 1024);
  EXPECT_EQ(resolve_config({{"preset", "12.5hz"}}).quantizer.codebook_size, 2048);
  EXPECT_EQ(resolve_config({{"preset", "6.25hz"}}).quantizer.codebook_size, 4096);
  auto bad = resolve_config({{"preset", "25hz"}, {"quantizer", {{"codebook_size", 2048}}}});
  EXPECT_TRUE(mentions(validate(bad), "codebook size"));
}

TEST(Config, SegmentSamples) {
  EXPECT_EQ(segment_samples(resolve_config({{"preset", "25hz"}})), 96000);
  EXPECT_EQ(segment_samples(resolve_config({{"preset", "6.25hz"}})), 89600);
}

TEST(Config, NonDyadicFrameRateRejected) {
  EncoderConfig e;
  e.strides = {3, 5, 4, 2};
  EXPECT_THROW(derive_frame_rate(e, 16000), ConfigError);
  e.strides = {8, 5, 4, 2};
  EXPECT_EQ(derive_frame_rate(e, 16000), 25.0);
}

TEST(Config, IdentityViolationIsReported) {
  auto cfg = resolve_config({{"preset", "25hz"}, {"decoder", {{"upsample_factor", 4}}}});
  auto v = validate(cfg);
  EXPECT_TRUE(mentions(v, "upsample_factor x istft_hop"));
  EXPECT_THROW(ensure_valid(cfg), ConfigError);
}

TEST(Config, EveryViolationListed) {
  auto cfg = resolve_config({{"preset", "toy-25hz"}});
  cfg.decoder.hop = 512;
  cfg.arms.aux = "bogus";
  cfg.train.batch_size = 0;
  try {
    ensure_valid(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_GE(e.violations().size(), 3u);
    EXPECT_TRUE(mentions(e.violations(), "arms.aux"));
    EXPECT_TRUE(mentions(e.violations(), "batch_size"));
  }
}

TEST(Config, AuxMustBeSmaller) {
  auto cfg = resolve_config({{"preset", "toy-25hz"}});
  cfg.decoder.aux_hidden = cfg.decoder.hidden;
  cfg.decoder.aux_layers = cfg.decoder.layers;
  EXPECT_TRUE(mentions(validate(cfg), "strictly smaller"));
}

TEST(Config, FeatureArmNeedsIntegerRateRatio) {
  auto cfg = resolve_config({{"preset", "toy-25hz"}, {"arms", {{"distill", "feature"}}}});
  EXPECT_TRUE(validate(cfg).empty());
  cfg.teacher.frame_rate = 40.0;
  cfg.teacher.strides = {5, 5, 4, 4};
  EXPECT_TRUE(mentions(validate(cfg), "integer multiple"));
}

TEST(Config, UnknownKeyRejected) {
  try {
    resolve_config({{"preset", "toy-25hz"}, {"train", {{"batchsize", 3}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_TRUE(mentions(e.violations(), "train.batchsize"));
  }
  EXPECT_THROW(resolve_config({{"preset", "50hz"}}), ConfigError);
}

TEST(Config, OverridesApply) {
  auto dir = semcodec::testing::scratch_dir("config_overrides");
  std::ofstream(dir / "c.json") << R"({"preset": "toy-12.5hz", "seed": 4})";
  auto cfg = load_config((dir / "c.json").string(), {"train.batch_size=3", "arms.aux=shared", "seed=9"});
  EXPECT_EQ(cfg.preset, "toy-12.5hz");
  EXPECT_EQ(cfg.train.batch_size, 3);
  EXPECT_EQ(cfg.arms.aux, "shared");
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_THROW(load_config("", {"novalue"}), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), IoError);
}

TEST(Config, JsonRoundTripAndDigest) {
  auto cfg = resolve_config({{"preset", "toy-6.25hz"}});
  auto back = from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(config_digest(back), config_digest(cfg));
  EXPECT_EQ(config_digest(cfg).size(), 64u);
  back.seed += 1;
  EXPECT_NE(config_digest(back), config_digest(cfg));
}

TEST(Config, PresetNames) {
  auto names = preset_names();
  EXPECT_EQ(names.size(), 6u);
  for (const auto& n : names) EXPECT_NO_THROW(ensure_valid(resolve_config({{"preset", n}})));
}
