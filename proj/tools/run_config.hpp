#pragma once

// Flag/config-file merging for the firesr tool. Every option is registered once;
// after parsing, values given on the command line win, then the config file
// (subcommand section first, then top level), then the built-in default. The
// merged result is what a run echoes into its run.json.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace firesr::cli {

class RunConfig {
 public:
  explicit RunConfig(std::string command) : command_(std::move(command)) {}

  const std::string& command() const { return command_; }

  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& flag, T& var, const std::string& help) {
    CLI::Option* opt = app->add_option("--" + flag, var, help)->capture_default_str();
    track(flag, opt, var);
    return opt;
  }

  CLI::Option* add_flag(CLI::App* app, const std::string& flag, bool& var, const std::string& help) {
    CLI::Option* opt = app->add_flag("--" + flag, var, help);
    track(flag, opt, var);
    return opt;
  }

  /// Loads the config file (when given) and resolves every registered option.
  void resolve(const std::string& config_path);

  /// Keys excluded from the echoed config and its hash (e.g. the output directory,
  /// so that identical runs into different directories echo identical configs).
  void exclude_from_echo(const std::string& flag);

  const nlohmann::json& effective() const { return effective_; }
  std::string config_hash() const;

 private:
  template <class T>
  void track(const std::string& flag, CLI::Option* opt, T& var) {
    const std::string key = to_key(flag);
    resolvers_.push_back([this, key, opt, &var] {
      if (opt->count() == 0) {
        if (const nlohmann::json* v = lookup(key)) var = v->get<T>();
      }
      values_[key] = var;
    });
  }

  static std::string to_key(std::string flag);
  const nlohmann::json* lookup(const std::string& key) const;

  std::string command_;
  std::vector<std::function<void()>> resolvers_;
  nlohmann::json file_ = nlohmann::json::object();
  nlohmann::json values_ = nlohmann::json::object();
  nlohmann::json effective_ = nlohmann::json::object();
  std::vector<std::string> excluded_;
};

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes);

/// Writes <out>/run.json: command, tool version, echoed config and its hash, seed,
/// inputs, and outputs (relative to <out>).
void write_run_manifest(const RunConfig& cfg, const std::filesystem::path& out,
                        std::uint64_t seed, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs);

/// Creates the directory (and parents); IoError when that fails.
void ensure_dir(const std::filesystem::path& dir);

}  // namespace firesr::cli
