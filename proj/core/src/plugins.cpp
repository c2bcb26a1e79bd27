#include "semcodec/plugins.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

namespace semcodec {

PluginError::PluginError(std::string plugin, std::string reason, int exit_code, std::string output)
    : Error("plugin '" + plugin + "': " + reason + " (exit " + std::to_string(exit_code) + ")\n" + output),
      plugin_(std::move(plugin)),
      reason_(std::move(reason)),
      exit_code_(exit_code),
      output_(std::move(output)) {}

void PluginRegistry::add(PluginSpec spec) {
  if (spec.name.empty() || spec.command.empty()) throw ConfigError("plugin needs a name and a command");
  auto name = spec.name;
  specs_[name] = std::move(spec);
}

const PluginSpec& PluginRegistry::get(const std::string& name) const {
  auto it = specs_.find(name);
  if (it == specs_.end()) throw ConfigError("plugin '" + name + "' is not registered");
  return it->second;
}

std::vector<std::string> PluginRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : specs_) out.push_back(k);
  return out;
}

PluginRegistry PluginRegistry::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("plugin registry not found: " + path.string());
  PluginRegistry r;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& p : j.at("plugins")) {
      r.add({p.at("name").get<std::string>(), p.at("command").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed plugin registry " + path.string() + ": " + e.what());
  }
  return r;
}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("semcodec-plugin-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string last_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  }
  return last;
}

}  // namespace

PluginResult plugin_metric(const PluginRegistry& registry, const std::string& name,
                           const Waveform* reference, const Waveform* estimate,
                           const TokenSequence* tokens) {
  PluginResult res;
  res.name = name;
  if (!registry.contains(name)) {
    res.detail = "no plugin registered under '" + name + "'";
    return res;
  }
  TempDir dir;
  std::string cmd = registry.get(name).command;
  auto bind = [&](const std::string& key, const std::string& file, auto&& write) {
    const auto p = dir.path() / file;
    if (cmd.find(key) == std::string::npos) return;
    write(p);
    replace_all(cmd, key, shell_quote(p.string()));
  };
  bind("{reference}", "reference.wav", [&](const std::filesystem::path& p) {
    if (reference) save_audio(p, *reference, WavEncoding::float32);
  });
  bind("{estimate}", "estimate.wav", [&](const std::filesystem::path& p) {
    if (estimate) save_audio(p, *estimate, WavEncoding::float32);
  });
  bind("{tokens}", "tokens.jsonl", [&](const std::filesystem::path& p) {
    if (tokens) std::ofstream(p) << tokens_to_jsonl(*tokens);
  });

  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) throw PluginError(name, "could not start adapter", -1, "");
  std::string output;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
  const int status = pclose(pipe);
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) throw PluginError(name, "adapter failed", code, output);

  const auto line = last_line(output);
  try {
    std::size_t used = 0;
    const double v = std::stod(line, &used);
    if (line.find_first_not_of(" \t\r", used) == std::string::npos) {
      res.available = true;
      res.value = v;
      return res;
    }
  } catch (const std::exception&) {
  }
  try {
    auto j = nlohmann::json::parse(line);
    if (j.is_object() && j.contains("value") && j["value"].is_number()) {
      res.available = true;
      res.value = j["value"].get<double>();
      return res;
    }
  } catch (const nlohmann::json::exception&) {
  }
  throw PluginError(name, "could not parse a numeric result from adapter output", code, output);
}

}  // namespace semcodec
