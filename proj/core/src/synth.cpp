#include "semcodec/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "semcodec/errors.hpp"

namespace semcodec {

namespace {

struct Phone {
  const char* name;
  double f1, f2, f3;
  double voicing;    // 0: noise only, 1: voiced only
  double noise_hz;   // fricative noise centre
  double gain;
  double seconds;
};

// Rough adult-male formant targets.
const std::vector<Phone>& phones() {
  static const std::vector<Phone> p = {
      {"a", 730, 1090, 2440, 1.0, 0, 1.0, 0.12},   {"i", 270, 2290, 3010, 1.0, 0, 0.8, 0.10},
      {"u", 300, 870, 2240, 1.0, 0, 0.8, 0.10},    {"e", 530, 1840, 2480, 1.0, 0, 0.9, 0.11},
      {"o", 570, 840, 2410, 1.0, 0, 0.9, 0.11},    {"ae", 660, 1720, 2410, 1.0, 0, 1.0, 0.12},
      {"er", 490, 1350, 1690, 1.0, 0, 0.8, 0.10},  {"m", 250, 1000, 2500, 1.0, 0, 0.4, 0.07},
      {"n", 250, 1700, 2500, 1.0, 0, 0.4, 0.07},   {"s", 400, 1500, 2500, 0.0, 5500, 0.35, 0.09},
      {"sh", 400, 1500, 2500, 0.0, 3000, 0.4, 0.09}, {"z", 300, 1500, 2500, 0.5, 5000, 0.4, 0.08},
  };
  return p;
}


// Two-pole resonator with unity gain at its centre frequency.
struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double step(double x, double freq, double bw, double rate) {
    const double r = std::exp(-std::numbers::pi * bw / rate);
    const double c = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / rate);
    const double y = (1.0 - r) * x + c * y1 - r * r * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

}  // namespace

const std::vector<std::string>& phone_inventory() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& p : phones()) n.emplace_back(p.name);
    return n;
  }();
  return names;
}

std::vector<Voice> make_voices(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> f0(90.0, 230.0), scale(0.88, 1.15), breath(0.01, 0.05);
  std::vector<Voice> v(static_cast<std::size_t>(count));
  for (auto& voice : v) {
    voice.f0 = f0(rng);
    voice.formant_scale = scale(rng);
    voice.breathiness = breath(rng);
  }
  return v;
}

std::vector<std::vector<int>> make_sentences(int count, int min_phones, int max_phones,
                                             std::uint64_t seed) {
  if (min_phones < 1 || max_phones < min_phones) throw ConfigError("invalid phone count range");
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(phones().size());
  std::uniform_int_distribution<int> len(min_phones, max_phones), vowel(0, 6), cons(7, n - 1);
  std::vector<std::vector<int>> out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<int> s;
    const int l = len(rng);
    for (int i = 0; i < l; ++i) s.push_back(i % 2 == 0 ? cons(rng) : vowel(rng));
    bool dup = false;
    for (const auto& o : out) dup = dup || o == s;
    if (!dup) out.push_back(std::move(s));
  }
  return out;
}

std::string transcript_of(const std::vector<int>& p) {
  std::string t;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) t += ' ';
    t += phones().at(static_cast<std::size_t>(p[i])).name;
  }
  return t;
}

Waveform synthesize(const std::vector<int>& seq, const Voice& voice, int rate, std::uint64_t seed) {
  if (seq.empty()) throw RangeError("cannot synthesize an empty phone sequence");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Per-sample targets with a short lead-in and tail of silence.
  const auto lead = static_cast<std::size_t>(0.08 * rate);
  std::vector<const Phone*> target;
  target.insert(target.end(), lead, nullptr);
  for (int id : seq) {
    const auto& p = phones().at(static_cast<std::size_t>(id));
    target.insert(target.end(), static_cast<std::size_t>(p.seconds * rate), &p);
  }
  target.insert(target.end(), lead, nullptr);

  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(target.size());
  Resonator r1, r2, r3, rn;
  double f1 = 500, f2 = 1500, f3 = 2500, voicing = 0, gain = 0, noise_hz = 4000;
  const double smooth = 1.0 - std::exp(-1.0 / (0.012 * rate));
  double phase = 0.0, glottal = 0.0, peak = 0.0;
  const double total = static_cast<double>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Phone* p = target[i];
    const double s = voice.formant_scale;
    if (p != nullptr) {
      f1 += smooth * (p->f1 * s - f1);
      f2 += smooth * (p->f2 * s - f2);
      f3 += smooth * (p->f3 * s - f3);
      voicing += smooth * (p->voicing - voicing);
      noise_hz += smooth * (p->noise_hz * s - noise_hz);
    }
    gain += smooth * ((p ? p->gain : 0.0) - gain);

    // Slowly falling pitch with a little vibrato.
    const double t = static_cast<double>(i) / rate;
    const double f0 = voice.f0 * (1.0 - 0.15 * static_cast<double>(i) / total) *
                      (1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * 5.0 * t));
    phase += f0 / rate;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    glottal = 0.96 * glottal + pulse;  // crude glottal-flow low-pass
    const double breath = voice.breathiness * gauss(rng);
    const double src = glottal - 1.0 / (1.0 - 0.96) * f0 / rate + breath;

    double voiced = r1.step(src, f1, 80, rate) + 0.6 * r2.step(src, f2, 100, rate) +
                    0.3 * r3.step(src, f3, 140, rate);
    double noise = rn.step(gauss(rng), std::min(noise_hz, 0.45 * rate), 1500, rate);
    const double y = gain * (voicing * voiced + (1.0 - voicing) * 2.0 * noise);
    w.samples[i] = static_cast<float>(y);
    peak = std::max(peak, std::abs(y));
  }
  const double norm = peak > 0 ? 0.6 / peak : 1.0;
  for (auto& v : w.samples) v = static_cast<float>(v * norm + 1e-4 * gauss(rng));
  return w;
}

Manifest synth_corpus(const std::filesystem::path& dir, const SynthOptions& opts) {
  if (opts.speakers < 1 || opts.sentences < 1) throw ConfigError("need at least one speaker and sentence");
  const auto voices = make_voices(opts.speakers, opts.speaker_seed);
  const auto sentences = make_sentences(opts.sentences, opts.min_phones, opts.max_phones,
                                        opts.sentence_seed);
  std::filesystem::create_directories(dir / "wavs");
  Manifest m;
  for (int s = 0; s < opts.speakers; ++s) {
    for (int k = 0; k < opts.sentences; ++k) {
      const std::string id = "spk" + std::to_string(s) + "_sent" + std::to_string(k);
      const auto seed = opts.speaker_seed * 1000003ULL + static_cast<std::uint64_t>(s * 7919 + k);
      auto w = synthesize(sentences[static_cast<std::size_t>(k)], voices[static_cast<std::size_t>(s)],
                          opts.sample_rate, seed);
      const auto rel = std::filesystem::path("wavs") / (id + ".wav");
      save_audio(dir / rel, w);
      ManifestRecord r;
      r.path = (dir / rel).string();
      r.transcript = transcript_of(sentences[static_cast<std::size_t>(k)]);
      r.duration = w.duration();
      r.speaker = "spk" + std::to_string(s);
      r.id = id;
      m.records.push_back(r);
    }
  }
  Manifest on_disk = m;
  for (auto& r : on_disk.records) r.path = std::filesystem::path(r.path).lexically_relative(dir).string();
  write_manifest(dir / "manifest.jsonl", on_disk);
  return m;
}

}  // namespace semcodec
