#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "wgqed/core.hpp"

namespace wgqed {

using Json = nlohmann::ordered_json;

// Schema violation in a run configuration; the message names the key.
class ConfigError : public InputError {
public:
    using InputError::InputError;
};

struct ParamDoc {
    std::string key;
    std::string doc;
};

struct ExperimentInfo {
    std::string name;
    std::string summary;
    std::vector<ParamDoc> params;
};

const std::vector<ExperimentInfo>& experiments();
std::string nearest_experiment(const std::string& name);
std::string list_experiments(bool as_json);

struct RunOptions {
    std::optional<std::string> output;  // replaces the config's output prefix
    std::optional<std::uint64_t> seed;
    bool write_files = true;
};

struct RunResult {
    Json summary;                      // headline numbers, also stored in the manifest
    std::vector<std::string> outputs;  // files written
    Json manifest;
};

// Full schema check, including experiment-specific parameters.
SystemSpec parse_system(const Json& j);
void validate_config(const Json& config, const std::string& base_dir = ".");
Json load_config(const std::string& path);

// Runs one configuration. Relative paths inside params resolve against base_dir.
RunResult execute(Json config, const RunOptions& opts, const std::string& base_dir = ".");

// Exit code 0 on success, 1 for configuration errors, 2 for numerical failures.
int run_config_file(const std::string& path, const RunOptions& opts, std::ostream& out, std::ostream& err);
int validate_config_file(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace wgqed
