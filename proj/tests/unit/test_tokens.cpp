#include <fstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/quantize.hpp"

using namespace semcodec;

namespace {

TokenSequence sample_tokens(int frames) {
  TokenSequence t;
  t.frame_rate = 12.5;
  t.semantic_codebook_size = 16384;
  t.acoustic_codebook_sizes = {2048, 2048, 2048, 2048, 2048, 2048, 2048};
  for (int f = 0; f < frames; ++f) {
    t.semantic_ids.push_back((f * 7919) % 16384);
    for (int k = 0; k < kNumAcousticQuantizers; ++k) t.acoustic_ids.push_back((f * 31 + k * 17) % 2048);
  }
  return t;
}

}  // namespace

TEST(Tokens, BinaryRoundTrip) {
  auto t = sample_tokens(37);
  EXPECT_EQ(deserialize_tokens(serialize_tokens(t)), t);
  auto dir = semcodec::testing::scratch_dir("tokens_bin");
  write_tokens(dir / "t.sctk", t);
  EXPECT_EQ(read_tokens(dir / "t.sctk"), t);
}

TEST(Tokens, BinaryLayoutSize) {
  auto bytes = serialize_tokens(sample_tokens(5));
  // magic, version, rate, 8 sizes, frame count, 5 rows of 8 ids
  EXPECT_EQ(bytes.size(), 4u + 4 + 8 + 8 * 4 + 8 + 5 * 8 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "SCTK");
}

TEST(Tokens, JsonlRoundTrip) {
  auto t = sample_tokens(9);
  EXPECT_EQ(tokens_from_jsonl(tokens_to_jsonl(t)), t);
}

TEST(Tokens, EmptySequenceRoundTrips) {
  auto t = sample_tokens(0);
  EXPECT_EQ(deserialize_tokens(serialize_tokens(t)), t);
  EXPECT_EQ(tokens_from_jsonl(tokens_to_jsonl(t)), t);
}

TEST(Tokens, BadMagicAndTruncation) {
  auto bytes = serialize_tokens(sample_tokens(3));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_tokens(bad), FormatError);
  EXPECT_THROW(deserialize_tokens(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(tokens_from_jsonl("{\"format\":\"other\"}\n"), FormatError);
  EXPECT_THROW(tokens_from_jsonl(""), FormatError);
}

TEST(Tokens, ValidateCatchesRangeAndShape) {
  auto t = sample_tokens(3);
  t.semantic_ids[1] = 16384;
  EXPECT_THROW(t.validate(), RangeError);
  t = sample_tokens(3);
  t.acoustic_ids[4] = -1;
  EXPECT_THROW(t.validate(), RangeError);
  t = sample_tokens(3);
  t.acoustic_ids.pop_back();
  EXPECT_THROW(t.validate(), ShapeError);
}

TEST(Tokens, MissingFileIsIoError) {
  EXPECT_THROW(read_tokens("/nonexistent/dir/t.sctk"), IoError);
}
