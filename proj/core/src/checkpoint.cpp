#include "semcodec/checkpoint.hpp"

#include <sstream>

#include <torch/torch.h>

#include "semcodec/errors.hpp"
#include "semcodec/train.hpp"

namespace semcodec {

namespace {

using torch::serialize::InputArchive;
using torch::serialize::OutputArchive;

void write_component(OutputArchive& archive, const std::string& name,
                     const torch::nn::Module* module) {
  if (module == nullptr) return;
  OutputArchive sub;
  module->save(sub);
  archive.write(name, sub);
}

bool read_component(InputArchive& archive, const std::string& name, torch::nn::Module* module) {
  if (module == nullptr) return false;
  InputArchive sub;
  if (!archive.try_read(name, sub)) {
    throw FormatError("checkpoint lacks component '" + name + "'");
  }
  module->load(sub);
  return true;
}

template <typename T>
T read_value(InputArchive& archive, const std::string& key) {
  c10::IValue v;
  if (!archive.try_read(key, v)) throw FormatError("checkpoint lacks '" + key + "'");
  return v.to<T>();
}

struct Components {
  std::vector<std::pair<std::string, torch::nn::Module*>> list;
};

Components components_of(TokenizerModelImpl& m) {
  Components c;
  c.list.emplace_back("semantic_encoder", m.semantic_encoder().get());
  c.list.emplace_back("acoustic_encoder", m.acoustic_encoder() ? m.acoustic_encoder().get() : nullptr);
  c.list.emplace_back("quantizer", m.quantizer().get());
  c.list.emplace_back("main_decoder", &m.main_decoder());
  c.list.emplace_back("aux_decoder", m.aux_decoder() ? m.aux_decoder().get() : nullptr);
  c.list.emplace_back("feature_projection",
                      m.feature_projection() ? m.feature_projection().get() : nullptr);
  return c;
}

InputArchive open_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw FormatError("cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  return archive;
}

CheckpointInfo read_info(InputArchive& archive, const std::filesystem::path& path) {
  CheckpointInfo info;
  info.version = read_value<std::int64_t>(archive, "version");
  if (info.version != kCheckpointVersion) {
    throw CheckpointVersionError("checkpoint " + path.string() + " has format version " +
                                 std::to_string(info.version) + "; this build reads version " +
                                 std::to_string(kCheckpointVersion) +
                                 ". Re-export it with a matching release.");
  }
  info.config = from_json(nlohmann::json::parse(read_value<std::string>(archive, "config")));
  info.teacher_dim = static_cast<int>(read_value<std::int64_t>(archive, "teacher_dim"));
  info.teacher_digest = read_value<std::string>(archive, "teacher_digest");
  c10::IValue marker;
  info.has_training_state = archive.try_read("step", marker);
  return info;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, TokenizerModelImpl& model,
                      int teacher_dim, const std::string& teacher_digest,
                      const TrainingSnapshot* training) {
  OutputArchive archive;
  archive.write("version", c10::IValue(kCheckpointVersion));
  archive.write("config", c10::IValue(to_json(model.config()).dump()));
  archive.write("teacher_dim", c10::IValue(static_cast<std::int64_t>(teacher_dim)));
  archive.write("teacher_digest", c10::IValue(teacher_digest));
  for (const auto& [name, module] : components_of(model).list) write_component(archive, name, module);

  if (training != nullptr) {
    write_component(archive, "discriminators", training->discriminators);
    if (training->generator_optimizer) {
      OutputArchive sub;
      training->generator_optimizer->save(sub);
      archive.write("optimizer_g", sub);
    }
    if (training->discriminator_optimizer) {
      OutputArchive sub;
      training->discriminator_optimizer->save(sub);
      archive.write("optimizer_d", sub);
    }
    if (training->rng) {
      std::ostringstream os;
      os << *training->rng;
      archive.write("rng", c10::IValue(os.str()));
    }
    auto gen = at::detail::getDefaultCPUGenerator();
    torch::Tensor torch_state;
    {
      std::lock_guard<std::mutex> lock(gen.mutex());
      torch_state = gen.get_state();
    }
    archive.write("torch_rng", torch_state, /*is_buffer=*/true);
    const TrainerState s = training->state ? *training->state : TrainerState{};
    archive.write("step", c10::IValue(s.step));
    archive.write("epoch", c10::IValue(s.epoch));
    archive.write("cursor", c10::IValue(static_cast<std::int64_t>(s.cursor)));
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  auto archive = open_archive(path);
  return read_info(archive, path);
}

TokenizerModel load_model(const std::filesystem::path& path, CheckpointInfo* info_out) {
  auto archive = open_archive(path);
  auto info = read_info(archive, path);
  TokenizerModel model(info.config, info.teacher_dim);
  for (const auto& [name, module] : components_of(*model).list) read_component(archive, name, module);
  model->eval();
  if (info_out) *info_out = info;
  return model;
}

namespace {

// Run location and schedule may change between sessions.
nlohmann::json resume_relevant(const RunConfig& cfg) {
  auto j = to_json(cfg);
  for (const char* key : {"out_dir", "manifest", "max_steps", "checkpoint_every", "log_every"})
    j["train"].erase(key);
  return j;
}

}  // namespace

void load_training_checkpoint(const std::filesystem::path& path, TokenizerModelImpl& model,
                              const TrainingRestore& r) {
  auto archive = open_archive(path);
  auto info = read_info(archive, path);
  if (!info.has_training_state) {
    throw Error("checkpoint " + path.string() + " is inference-only and cannot resume training");
  }
  if (resume_relevant(info.config) != resume_relevant(model.config())) {
    throw ConfigError("checkpoint configuration differs from the trainer configuration");
  }
  for (const auto& [name, module] : components_of(model).list) read_component(archive, name, module);
  read_component(archive, "discriminators", r.discriminators);
  if (r.generator_optimizer) {
    InputArchive sub;
    archive.read("optimizer_g", sub);
    r.generator_optimizer->load(sub);
  }
  if (r.discriminator_optimizer) {
    InputArchive sub;
    archive.read("optimizer_d", sub);
    r.discriminator_optimizer->load(sub);
  }
  if (r.rng) {
    std::istringstream is(read_value<std::string>(archive, "rng"));
    is >> *r.rng;
  }
  torch::Tensor torch_state;
  archive.read("torch_rng", torch_state, /*is_buffer=*/true);
  auto gen = at::detail::getDefaultCPUGenerator();
  {
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(torch_state);
  }
  if (r.state) {
    r.state->step = read_value<std::int64_t>(archive, "step");
    r.state->epoch = read_value<std::int64_t>(archive, "epoch");
    r.state->cursor = static_cast<std::size_t>(read_value<std::int64_t>(archive, "cursor"));
  }
}

}  // namespace semcodec
