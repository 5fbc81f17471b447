#include "run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "firesr/error.hpp"

namespace firesr::cli {

std::string RunConfig::to_key(std::string flag) {
  std::replace(flag.begin(), flag.end(), '-', '_');
  return flag;
}

const nlohmann::json* RunConfig::lookup(const std::string& key) const {
  const std::string section = to_key(command_);
  if (file_.contains(section) && file_[section].is_object() && file_[section].contains(key)) {
    return &file_[section][key];
  }
  if (file_.contains(key)) return &file_[key];
  return nullptr;
}

void RunConfig::resolve(const std::string& config_path) {
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw IoError("cannot open config file '" + config_path + "'");
    try {
      file_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config file '" + config_path + "' is not valid JSON: " + e.what());
    }
    if (!file_.is_object()) throw UsageError("config file '" + config_path + "' must hold a JSON object");
  }
  for (auto& r : resolvers_) {
    try {
      r();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config file '" + config_path + "': " + e.what());
    }
  }
  effective_ = values_;
  for (const auto& k : excluded_) effective_.erase(k);
}

void RunConfig::exclude_from_echo(const std::string& flag) {
  excluded_.push_back(to_key(flag));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::config_hash() const { return fnv1a_hex(effective_.dump()); }

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'");
  }
}

void write_run_manifest(const RunConfig& cfg, const std::filesystem::path& out,
                        std::uint64_t seed, const std::vector<std::string>& inputs,
                        const std::vector<std::string>& outputs) {
  const nlohmann::json j = {
      {"command", cfg.command()},
      {"tool_version", FIRESR_VERSION},
      {"config", cfg.effective()},
      {"config_hash", cfg.config_hash()},
      {"seed", seed},
      {"inputs", inputs},
      {"outputs", outputs},
  };
  std::ofstream f(out / "run.json", std::ios::binary);
  if (!f) throw IoError("cannot write '" + (out / "run.json").string() + "'");
  f << j.dump(2) << "\n";
}

}  // namespace firesr::cli
