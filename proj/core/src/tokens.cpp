#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "semcodec/errors.hpp"
#include "semcodec/quantize.hpp"

namespace semcodec {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'T', 'K'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw FormatError("truncated token stream");
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string serialize_tokens(const TokenSequence& t) {
  t.validate();
  std::string out;
  out.reserve(64 + t.semantic_ids.size() * 4 * (1 + kNumAcousticQuantizers));
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kTokenFormatVersion);
  put<double>(out, t.frame_rate);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.semantic_codebook_size));
  for (auto size : t.acoustic_codebook_sizes) put<std::uint32_t>(out, static_cast<std::uint32_t>(size));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(t.frames()));
  for (std::int64_t f = 0; f < t.frames(); ++f) {
    put<std::int32_t>(out, t.semantic_ids[static_cast<std::size_t>(f)]);
    for (int k = 0; k < kNumAcousticQuantizers; ++k) put<std::int32_t>(out, t.acoustic(f, k));
  }
  return out;
}

TokenSequence deserialize_tokens(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("not a token stream (bad magic)");
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kTokenFormatVersion) {
    throw FormatError("unsupported token format version " + std::to_string(version));
  }
  TokenSequence t;
  t.frame_rate = take<double>(bytes, pos);
  t.semantic_codebook_size = take<std::uint32_t>(bytes, pos);
  for (int k = 0; k < kNumAcousticQuantizers; ++k) {
    t.acoustic_codebook_sizes.push_back(take<std::uint32_t>(bytes, pos));
  }
  const auto frames = take<std::uint64_t>(bytes, pos);
  const std::size_t row_bytes = 4 * (1 + kNumAcousticQuantizers);
  if ((bytes.size() - pos) != frames * row_bytes) {
    throw FormatError("token stream length does not match its header");
  }
  t.semantic_ids.reserve(frames);
  t.acoustic_ids.reserve(frames * kNumAcousticQuantizers);
  for (std::uint64_t f = 0; f < frames; ++f) {
    t.semantic_ids.push_back(take<std::int32_t>(bytes, pos));
    for (int k = 0; k < kNumAcousticQuantizers; ++k) {
      t.acoustic_ids.push_back(take<std::int32_t>(bytes, pos));
    }
  }
  t.validate();
  return t;
}

void write_tokens(const std::filesystem::path& path, const TokenSequence& t) {
  const auto bytes = serialize_tokens(t);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tokens: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

TokenSequence read_tokens(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read tokens: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= 1 && bytes.front() == '{') return tokens_from_jsonl(bytes);
  return deserialize_tokens(bytes);
}

std::string tokens_to_jsonl(const TokenSequence& t) {
  t.validate();
  nlohmann::json header = {{"format", "semcodec-tokens"},
                           {"version", kTokenFormatVersion},
                           {"frame_rate", t.frame_rate},
                           {"semantic_codebook_size", t.semantic_codebook_size},
                           {"acoustic_codebook_sizes", t.acoustic_codebook_sizes},
                           {"frames", t.frames()}};
  std::string out = header.dump() + "\n";
  for (std::int64_t f = 0; f < t.frames(); ++f) {
    std::vector<std::int32_t> ac(kNumAcousticQuantizers);
    for (int k = 0; k < kNumAcousticQuantizers; ++k) ac[static_cast<std::size_t>(k)] = t.acoustic(f, k);
    nlohmann::json row = {{"t", f},
                          {"semantic", t.semantic_ids[static_cast<std::size_t>(f)]},
                          {"acoustic", ac}};
    out += row.dump() + "\n";
  }
  return out;
}

TokenSequence tokens_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty token document");
  TokenSequence t;
  std::int64_t frames = 0;
  try {
    auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "semcodec-tokens") throw FormatError("not a token document");
    if (header.at("version").get<std::uint32_t>() != kTokenFormatVersion) {
      throw FormatError("unsupported token document version");
    }
    t.frame_rate = header.at("frame_rate").get<double>();
    t.semantic_codebook_size = header.at("semantic_codebook_size").get<std::int64_t>();
    t.acoustic_codebook_sizes = header.at("acoustic_codebook_sizes").get<std::vector<std::int64_t>>();
    frames = header.at("frames").get<std::int64_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto row = nlohmann::json::parse(line);
      if (row.at("t").get<std::int64_t>() != t.frames()) throw FormatError("token rows out of order");
      t.semantic_ids.push_back(row.at("semantic").get<std::int32_t>());
      auto ac = row.at("acoustic").get<std::vector<std::int32_t>>();
      if (ac.size() != kNumAcousticQuantizers) throw FormatError("acoustic row has wrong width");
      t.acoustic_ids.insert(t.acoustic_ids.end(), ac.begin(), ac.end());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed token document: ") + e.what());
  }
  if (frames != t.frames()) throw FormatError("token document frame count mismatch");
  t.validate();
  return t;
}

}  // namespace semcodec
