#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvckit::app {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kValidationFailure = 1, kConfigError = 2, kNumericalFailure = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeySpec {
    std::string key;
    std::string default_value;
    std::string help;
};

// Every recognised configuration key; each one is also a `--key` flag (underscores become dashes).
const std::vector<KeySpec>& config_keys();

/// Flat key = value configuration. Relative paths are resolved against `base_dir`
/// (the config file's directory, or the working directory for flags).
struct RunConfig {
    std::map<std::string, std::string> values;
    std::map<std::string, std::filesystem::path> base_dirs;

    static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir);
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value, const std::filesystem::path& base_dir);
    std::string get(const std::string& key) const;  // falls back to the documented default
    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::vector<std::string> list(const std::string& key, char sep = ',') const;
    std::filesystem::path path(const std::string& key) const;
    std::vector<std::filesystem::path> paths(const std::string& key) const;
    double number(const std::string& key) const;

    // Canonical "key = value" text of the explicitly set keys, sorted.
    std::string snapshot() const;
};

struct CommandResult {
    int exit_code = kOk;
    std::filesystem::path output_dir;
    std::vector<std::string> messages;
};

CommandResult cmd_validate(const RunConfig& config);
CommandResult cmd_decompose(const RunConfig& config);
CommandResult cmd_event_study(const RunConfig& config);
CommandResult cmd_deviations(const RunConfig& config);
CommandResult cmd_synth(const RunConfig& config);

// Dispatches `gvckit <command> [--config path] [--key value ...]`.
int run_cli(int argc, char** argv);

}  // namespace gvckit::app
