#include "semcodec_cli/commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semcodec/checkpoint.hpp"
#include "semcodec/config.hpp"
#include "semcodec/digest.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/eval.hpp"
#include "semcodec/model.hpp"
#include "semcodec/synth.hpp"
#include "semcodec/teacher.hpp"
#include "semcodec/train.hpp"

namespace semcodec::cli {

namespace fs = std::filesystem;

fs::path resolve_home_path(const fs::path& p) {
  if (p.empty() || p.is_absolute() || fs::exists(p)) return p;
  if (const char* home = std::getenv("SEMCODEC_HOME"); home != nullptr && *home != '\0') {
    return fs::path(home) / p;
  }
  return p;
}

namespace {

struct ConfigArgs {
  std::string file;
  std::string preset;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("-c,--config", a.file, "Layered JSON config (preset + overrides)");
  cmd->add_option("-p,--preset", a.preset, "Preset name (overrides the file's preset)");
  cmd->add_option("-s,--set", a.sets, "Override, e.g. arms.distill=feature (repeatable)");
}

RunConfig build_config(const ConfigArgs& a) {
  std::vector<std::string> overrides;
  if (!a.preset.empty()) overrides.push_back("preset=" + a.preset);
  overrides.insert(overrides.end(), a.sets.begin(), a.sets.end());
  auto cfg = load_config(a.file.empty() ? "" : resolve_home_path(a.file).string(), overrides);
  ensure_valid(cfg);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

struct Loaded {
  TokenizerModel model{nullptr};
  CheckpointInfo info;
  std::string checkpoint_digest;
};

Loaded load(const std::string& checkpoint) {
  const auto path = resolve_home_path(checkpoint);
  Loaded l;
  l.model = load_model(path, &l.info);
  l.checkpoint_digest = sha256_file(path);
  return l;
}

int cmd_config(const ConfigArgs& a, bool list, std::ostream& out) {
  if (list) {
    for (const auto& p : preset_names()) out << p << '\n';
    return kSuccess;
  }
  auto cfg = build_config(a);
  const auto timing = frame_rate_config(cfg);
  out << nlohmann::json{{"config", to_json(cfg)},
                        {"config_digest", config_digest(cfg)},
                        {"frame_rate", timing.frame_rate},
                        {"samples_per_frame", timing.samples_per_frame}}
             .dump(2)
      << '\n';
  return kSuccess;
}

int cmd_train(ConfigArgs a, const std::string& out_dir, std::int64_t steps,
              const std::string& resume, std::ostream& out) {
  if (!out_dir.empty()) a.sets.push_back("train.out_dir=" + out_dir);
  auto cfg = build_config(a);
  if (fs::path(cfg.train.out_dir).is_relative()) {
    if (const char* home = std::getenv("SEMCODEC_HOME"); home != nullptr && *home != '\0') {
      cfg.train.out_dir = (fs::path(home) / cfg.train.out_dir).string();
    }
  }
  if (!cfg.train.manifest.empty()) cfg.train.manifest = resolve_home_path(cfg.train.manifest).string();
  if (cfg.train.manifest.empty()) throw ConfigError("train.manifest is required for training");

  Trainer trainer(cfg);
  if (!resume.empty()) trainer.load_checkpoint(resolve_home_path(resume));
  const fs::path dir(cfg.train.out_dir);
  write_json(dir / "config.json", {{"config", to_json(cfg)}, {"config_digest", config_digest(cfg)}});

  const std::int64_t budget = steps > 0 ? steps : std::numeric_limits<std::int64_t>::max() / 2;
  trainer.run(budget, [&](const StepReport& r) {
    if (r.step % cfg.train.log_every == 0) {
      out << "step " << r.step << " loss_total " << r.losses.at("loss_total") << " loss_distill "
          << r.losses.at("loss_distill") << " loss_d " << r.losses.at("loss_d") << '\n';
    }
  });
  const auto final_path = dir / "final.ckpt";
  trainer.save_checkpoint(final_path);
  out << "checkpoint " << final_path.string() << '\n'
      << "config_digest " << config_digest(cfg) << '\n';
  return kSuccess;
}

int cmd_encode(const std::string& checkpoint, const std::string& input, const std::string& output,
               std::ostream& out) {
  auto l = load(checkpoint);
  auto tokens = l.model->encode(load_audio(input));
  const fs::path path(output);
  if (path.extension() == ".jsonl") {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream(path) << tokens_to_jsonl(tokens);
  } else {
    write_tokens(path, tokens);
  }
  write_json(fs::path(output + ".json"), {{"frames", tokens.frames()},
                                          {"frame_rate", tokens.frame_rate},
                                          {"config_digest", config_digest(l.info.config)},
                                          {"checkpoint_digest", l.checkpoint_digest}});
  out << "frames " << tokens.frames() << '\n' << "config_digest " << config_digest(l.info.config) << '\n';
  return kSuccess;
}

int cmd_decode(const std::string& checkpoint, const std::string& input, const std::string& output,
               const std::string& mode_name, std::ostream& out) {
  const auto mode = parse_decode_mode(mode_name);
  auto l = load(checkpoint);
  TokenSequence tokens;
  if (fs::path(input).extension() == ".jsonl") {
    std::ifstream in(input);
    std::stringstream text;
    text << in.rdbuf();
    tokens = tokens_from_jsonl(text.str());
  } else {
    tokens = read_tokens(input);
  }
  auto wav = l.model->decode(tokens, mode);
  save_audio(output, wav);
  // Which decoder produced the audio, identified by its parameters.
  std::string decoder = "main_decoder";
  std::string decoder_digest = parameter_digest(l.model->main_decoder());
  if (mode == DecodeMode::semantic_only && l.model->aux_decoder()) {
    decoder = "aux_decoder";
    decoder_digest = parameter_digest(*l.model->aux_decoder());
  }
  write_json(fs::path(output + ".json"), {{"samples", wav.samples.size()},
                                          {"mode", mode_name},
                                          {"decoder", decoder},
                                          {"decoder_digest", decoder_digest},
                                          {"config_digest", config_digest(l.info.config)},
                                          {"checkpoint_digest", l.checkpoint_digest}});
  out << "samples " << wav.samples.size() << '\n' << "decoder " << decoder << '\n';
  return kSuccess;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

fs::path default_report(const std::string& checkpoint, const std::string& name) {
  return resolve_home_path(checkpoint).parent_path() / name;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& metrics,
             const std::string& plugins, int num_hashes, std::uint64_t lsh_seed, std::string output,
             std::ostream& out) {
  auto l = load(checkpoint);
  EvalOptions opts;
  opts.metrics = split_list(metrics);
  if (opts.metrics.empty()) throw ConfigError("--metrics must name at least one metric");
  opts.plugins = plugins;
  opts.lsh.num_hashes = num_hashes;
  opts.lsh.seed = lsh_seed;
  auto report = evaluate(*l.model, load_manifest(resolve_home_path(manifest)), opts, l.checkpoint_digest);
  if (output.empty()) output = default_report(checkpoint, "eval_report.json").string();
  write_json(output, report);
  out << output << '\n';
  return kSuccess;
}

int cmd_kl_report(const std::string& checkpoint, const std::string& manifest, std::string output,
                  std::ostream& out) {
  auto l = load(checkpoint);
  auto teacher = make_teacher(l.info.config.teacher);
  if (teacher->digest() != l.info.teacher_digest) {
    throw ConfigError("teacher digest differs from the one recorded in the checkpoint");
  }
  auto report = kl_report(*l.model, *teacher, load_manifest(resolve_home_path(manifest)),
                          l.checkpoint_digest);
  if (output.empty()) output = default_report(checkpoint, "kl_report.json").string();
  write_json(output, report);
  out << output << '\n';
  return kSuccess;
}

int cmd_export(const std::string& checkpoint, const std::string& manifest, const std::string& output,
               std::ostream& out) {
  auto l = load(checkpoint);
  std::vector<ClipRef> clips;
  for (const auto& r : load_manifest(resolve_home_path(manifest)).records) {
    clips.push_back({r.id, r.speaker, r.path});
  }
  auto records = export_embeddings(*l.model, clips);
  write_embeddings(output, records);
  out << output << '\n';
  return kSuccess;
}

int cmd_synth(const std::string& dir, const SynthOptions& opts, std::ostream& out) {
  auto m = synth_corpus(dir, opts);
  out << (fs::path(dir) / "manifest.jsonl").string() << '\n' << "clips " << m.records.size() << '\n';
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"semcodec: speech tokenizer training, coding and analysis", "semcodec"};
  app.require_subcommand(1);

  ConfigArgs cfg_args;
  bool list_presets = false;
  auto* config = app.add_subcommand("config", "Print the fully resolved configuration");
  add_config_options(config, cfg_args);
  config->add_flag("--list-presets", list_presets, "List preset names");

  std::string out_dir, resume;
  std::int64_t steps = 0;
  auto* train = app.add_subcommand("train", "Train a tokenizer");
  add_config_options(train, cfg_args);
  train->add_option("-o,--out", out_dir, "Run directory (overrides train.out_dir)");
  train->add_option("--steps", steps, "Stop after this many steps (default: epoch budget)");
  train->add_option("--resume", resume, "Training checkpoint to resume from");

  std::string checkpoint, input, output, mode = "full";
  auto* encode = app.add_subcommand("encode", "Audio to tokens");
  encode->add_option("--checkpoint", checkpoint)->required();
  encode->add_option("-i,--input", input, "WAV file")->required()->check(CLI::ExistingFile);
  encode->add_option("-o,--output", output, "Token file (.jsonl for JSON lines, else binary)")->required();

  auto* decode = app.add_subcommand("decode", "Tokens to audio");
  decode->add_option("--checkpoint", checkpoint)->required();
  decode->add_option("-i,--input", input, "Token file")->required()->check(CLI::ExistingFile);
  decode->add_option("-o,--output", output, "WAV file")->required();
  decode->add_option("--mode", mode, "full | semantic-only");

  std::string manifest, metrics = "snmi,si_snr,mel_distance", plugins;
  int num_hashes = 64;
  std::uint64_t lsh_seed = LshOptions{}.seed;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("-m,--manifest", manifest)->required();
  eval->add_option("--metrics", metrics, "Comma-separated: snmi, si_snr, mel_distance, or plugin names");
  eval->add_option("--plugins", plugins, "Plugin registry JSON");
  eval->add_option("--lsh-hashes", num_hashes);
  eval->add_option("--lsh-seed", lsh_seed);
  eval->add_option("-o,--output", output, "Report path (default: next to the checkpoint)");

  auto* kl = app.add_subcommand("kl-report", "Gaussian KL diagnostics on teacher features");
  kl->add_option("--checkpoint", checkpoint)->required();
  kl->add_option("-m,--manifest", manifest)->required();
  kl->add_option("-o,--output", output, "Report path (default: next to the checkpoint)");

  auto* exp = app.add_subcommand("export-embeddings", "Per-clip time-mean embeddings");
  exp->add_option("--checkpoint", checkpoint)->required();
  exp->add_option("-m,--manifest", manifest)->required();
  exp->add_option("-o,--output", output)->required();

  SynthOptions synth_opts;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth-corpus", "Write a synthetic multi-speaker corpus");
  synth->add_option("-o,--out", synth_dir)->required();
  synth->add_option("--speakers", synth_opts.speakers);
  synth->add_option("--sentences", synth_opts.sentences);
  synth->add_option("--speaker-seed", synth_opts.speaker_seed);
  synth->add_option("--sentence-seed", synth_opts.sentence_seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kSuccess : kValidation;
  }

  try {
    if (*config) return cmd_config(cfg_args, list_presets, out);
    if (*train) return cmd_train(cfg_args, out_dir, steps, resume, out);
    if (*encode) return cmd_encode(checkpoint, input, output, out);
    if (*decode) return cmd_decode(checkpoint, input, output, mode, out);
    if (*eval) {
      return cmd_eval(checkpoint, manifest, metrics, plugins, num_hashes, lsh_seed, output, out);
    }
    if (*kl) return cmd_kl_report(checkpoint, manifest, output, out);
    if (*exp) return cmd_export(checkpoint, manifest, output, out);
    if (*synth) return cmd_synth(synth_dir, synth_opts, out);
  } catch (const ConfigError& e) {
    err << "invalid configuration:\n";
    for (const auto& v : e.violations()) err << "  - " << v << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

}  // namespace semcodec::cli
