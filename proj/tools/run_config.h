// Copyright 2026 The dereverb Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Run configuration for the dereverb tool.
//
// Format: INI sections of key = value lines, '#' or ';' comments.
//
//   [model]
//   variant = proposed
//   context = 11
//
// Every key also exists as a flag, --section.key VALUE, which takes
// precedence over the file. Unknown keys are rejected in both places.

#ifndef DEREVERB_TOOLS_RUN_CONFIG_H_
#define DEREVERB_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dereverb/dataset.h"
#include "dereverb/model.h"
#include "dereverb/train.h"

namespace dereverb::tool {

// Bad command line or configuration (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigKey {
  const char* name;  // "section.key"
  const char* default_value;
  const char* help;
};

// All recognised keys in file order.
const std::vector<ConfigKey>& ConfigSchema();

class RunConfig {
 public:
  RunConfig();  // schema defaults

  // Throws UsageError for an unknown key.
  void Set(const std::string& name, const std::string& value);
  // Merges a config file; throws UsageError on unknown keys and DataError
  // when the file cannot be read.
  void LoadFile(const std::filesystem::path& path);

  const std::string& Get(const std::string& name) const;
  int64_t GetInt(const std::string& name) const;
  uint64_t GetSeed(const std::string& name) const;
  double GetDouble(const std::string& name) const;
  bool GetBool(const std::string& name) const;
  std::filesystem::path GetPath(const std::string& name) const;

  // Typed views; each validates and throws UsageError on bad values.
  ModelConfig Model() const;
  BankConfig Bank() const;
  SynthConfig Synth() const;
  TrainConfig Train() const;
  int Workers() const;

  // Resolved configuration in the file format, with every key.
  std::string ToIni() const;
  // Writes ToIni() to dir/dereverb-<stage>.ini.
  void Echo(const std::filesystem::path& dir, const std::string& stage) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dereverb::tool

#endif  // DEREVERB_TOOLS_RUN_CONFIG_H_
