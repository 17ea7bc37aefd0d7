#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esc/gateway.hpp"
#include "esc/model.hpp"
#include "esc/trainer.hpp"

namespace esc::app {

/// Bad command line or config; maps to exit code 2.
struct UsageError : Error {
    using Error::Error;
};

/// Every accepted key with its default. Keys with a null default accept
/// any scalar.
nlohmann::json default_config();

/// Reads a config file and merges it over the defaults. Unknown keys and
/// type mismatches throw UsageError.
nlohmann::json load_config(const std::filesystem::path& path);

/// Applies "section.key=value". The value is parsed as JSON when it can
/// be, otherwise taken as a string.
void apply_override(nlohmann::json& cfg, const std::string& assignment);

/// Checks `cfg` against the schema of default_config().
void validate_config(const nlohmann::json& cfg);

net::ModelConfig model_config(const nlohmann::json& cfg, int vocab_size);
train::TrainingConfig training_config(const nlohmann::json& cfg, const net::ModelConfig& model);

/// Resolves a configured path: absolute paths stay, relative ones are
/// taken under $<env_var> when it is set.
std::filesystem::path resolve_path(const std::string& value, const char* env_var);

/// Builds the chat engine for a finished run directory.
std::shared_ptr<gateway::Engine> load_engine(const std::filesystem::path& run_dir, const nlohmann::json& cfg);

/// Runs one console command. Returns the process exit code:
/// 0 success, 1 runtime failure, 2 usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace esc::app
