#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "semcodec/audio.hpp"
#include "semcodec/errors.hpp"
#include "semcodec/quantize.hpp"

namespace semcodec {

// External metric adapter. `command` is run through the shell after
// substituting {reference}, {estimate} and {tokens} with temporary file paths
// (WAV, WAV, JSON-lines tokens). The last non-empty stdout line must be a
// number or a JSON object with a numeric "value".
struct PluginSpec {
  std::string name;
  std::string command;
};

struct PluginResult {
  std::string name;
  bool available = false;
  double value = 0.0;
  std::string detail;  // why the metric is unavailable
};

// Raised when an adapter runs but fails or prints something unparseable.
class PluginError : public Error {
 public:
  PluginError(std::string plugin, std::string reason, int exit_code, std::string output);
  const std::string& plugin() const { return plugin_; }
  const std::string& reason() const { return reason_; }
  int exit_code() const { return exit_code_; }
  const std::string& output() const { return output_; }

 private:
  std::string plugin_, reason_;
  int exit_code_;
  std::string output_;
};

class PluginRegistry {
 public:
  void add(PluginSpec spec);
  bool contains(const std::string& name) const { return specs_.count(name) != 0; }
  bool empty() const { return specs_.empty(); }
  const PluginSpec& get(const std::string& name) const;
  std::vector<std::string> names() const;

  // {"plugins": [{"name": ..., "command": ...}, ...]}
  static PluginRegistry from_file(const std::filesystem::path& path);

 private:
  std::map<std::string, PluginSpec> specs_;
};

// Unregistered names give available == false. Any input may be null; its
// placeholder then expands to an empty string.
PluginResult plugin_metric(const PluginRegistry& registry, const std::string& name,
                           const Waveform* reference, const Waveform* estimate,
                           const TokenSequence* tokens);

}  // namespace semcodec
