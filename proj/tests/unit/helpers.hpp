#pragma once

#include <filesystem>
#include <string>

#include <unistd.h>

#include "semcodec/config.hpp"
#include "semcodec/synth.hpp"
#include "semcodec/train.hpp"

namespace semcodec::testing {

// toy-25hz shrunk further so a training step takes well under a second.
inline RunConfig tiny_config(const std::string& preset = "toy-25hz") {
  auto cfg = resolve_config({{"preset", preset}});
  cfg.encoder.transformer_layers = 1;
  cfg.decoder.layers = 1;
  cfg.decoder.hidden = 64;
  cfg.decoder.intermediate = 128;
  cfg.decoder.aux_hidden = 32;
  cfg.decoder.aux_intermediate = 64;
  cfg.quantizer.codebook_size = 16;
  cfg.quantizer.kmeans_iters = 2;
  cfg.teacher.channels = {16, 16, 32, 64};
  cfg.teacher.dim = 64;
  cfg.teacher.transformer_heads = 4;
  cfg.teacher.transformer_ffn = 128;
  cfg.teacher.transformer_layers = 1;
  cfg.discriminator.stft_ffts = {512, 128};
  cfg.discriminator.periods = {2, 3};
  cfg.discriminator.num_scales = 2;
  cfg.discriminator.channels = 4;
  cfg.train.segment_seconds = 0.64;
  cfg.train.batch_size = 2;
  cfg.train.accum_steps = 1;
  return cfg;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("semcodec-test-" + std::to_string(::getpid())) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Small synthetic corpus shared by the tests of one process.
inline const Manifest& test_corpus() {
  static const Manifest m = [] {
    SynthOptions o;
    o.speakers = 2;
    o.sentences = 3;
    return synth_corpus(scratch_dir("corpus"), o);
  }();
  return m;
}

}  // namespace semcodec::testing
