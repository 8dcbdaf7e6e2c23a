#pragma once

#include <string>

namespace reltask {

inline constexpr const char* kVersion = "0.1.0";

struct CommandResult {
  int exit_code = 0;  // 0 ok, 1 partial failure, 2 fatal
  std::string report_json;
};

// Front door shared by the C API and the CLI. `command` is one of
// gen|train|kernel|nmatrix|probe|sweep|figures|selftest; the config is a
// JSON document validated against the command's schema (unknown keys are
// rejected). Outputs land under the config's out_dir together with a run
// manifest. Fatal problems throw reltask::Error.
CommandResult run_command(const std::string& command,
                          const std::string& config_json);

// FNV-1a over the canonicalized (sorted-key) JSON text.
std::string config_hash(const std::string& config_json);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace reltask
