#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semcodec/audio.hpp"
#include "semcodec/train.hpp"

namespace semcodec {

// Formant-synthesized toy speech: every speaker reads every sentence, and the
// transcript is the space-separated phone string.
struct SynthOptions {
  int speakers = 4;
  int sentences = 8;
  int min_phones = 10;
  int max_phones = 16;
  int sample_rate = 16000;
  std::uint64_t speaker_seed = 1;   // voices
  std::uint64_t sentence_seed = 2;  // texts
};

struct Voice {
  double f0 = 120.0;            // Hz
  double formant_scale = 1.0;
  double breathiness = 0.02;
};

const std::vector<std::string>& phone_inventory();

std::vector<Voice> make_voices(int count, std::uint64_t seed);
std::vector<std::vector<int>> make_sentences(int count, int min_phones, int max_phones,
                                             std::uint64_t seed);
std::string transcript_of(const std::vector<int>& phones);

Waveform synthesize(const std::vector<int>& phones, const Voice& voice, int sample_rate,
                    std::uint64_t seed);

// Writes wavs/<speaker>_<sentence>.wav and manifest.jsonl under `dir`.
Manifest synth_corpus(const std::filesystem::path& dir, const SynthOptions& opts);

}  // namespace semcodec
