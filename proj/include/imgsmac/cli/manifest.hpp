#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "imgsmac/common.hpp"

namespace imgsmac::cli {

inline constexpr int kManifestVersion = 1;

/// JSON record of a run directory: config snapshot, checkpoints with content hashes, metric files
/// and analysis artifacts. Paths are relative to the run directory.
class RunManifest {
 public:
  explicit RunManifest(std::filesystem::path dir) : dir_(std::move(dir)) {
    const auto p = path();
    if (std::filesystem::exists(p)) {
      std::ifstream in(p);
      try {
        j_ = nlohmann::ordered_json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest '" + p.string() + "' is not valid JSON: " + e.what());
      }
      require(j_.value("format_version", 0) == kManifestVersion,
              "manifest '" + p.string() + "' has an unsupported format version");
    } else {
      j_["format_version"] = kManifestVersion;
      j_["config"] = "";
      j_["checkpoints"] = nlohmann::ordered_json::array();
      j_["metrics"] = nlohmann::ordered_json::array();
      j_["analysis"] = nlohmann::ordered_json::object();
      j_["artifacts"] = nlohmann::ordered_json::array();
    }
  }

  std::filesystem::path path() const { return dir_ / "manifest.json"; }
  const nlohmann::ordered_json& json() const { return j_; }

  void set_config(const std::string& text) { j_["config"] = text; }

  void add_checkpoint(const std::string& phase, std::uint64_t seed, double budget, const std::string& file,
                      const std::string& hash) {
    auto& cks = j_["checkpoints"];
    for (auto it = cks.begin(); it != cks.end(); ++it) {
      if ((*it)["path"] == file) {
        cks.erase(it);
        break;
      }
    }
    cks.push_back({{"phase", phase}, {"seed", seed}, {"budget", budget}, {"path", file}, {"hash", hash}});
  }

  void add_metrics(const std::string& file) { add_unique("metrics", file); }
  void add_artifact(const std::string& file) { add_unique("artifacts", file); }

  void set_analysis(std::uint64_t seed, const nlohmann::ordered_json& entry) {
    j_["analysis"][std::to_string(seed)] = entry;
  }

  /// b* recorded by a previous analysis of this seed, if any.
  bool recorded_bstar(std::uint64_t seed, double& out) const {
    const auto& a = j_["analysis"];
    const auto key = std::to_string(seed);
    if (!a.contains(key) || !a[key].contains("bstar") || !a[key]["bstar"].is_number()) return false;
    out = a[key]["bstar"].get<double>();
    return true;
  }

  /// Writes manifest.json after checking that every referenced file exists.
  void write() const {
    auto check = [&](const std::string& rel) {
      require(std::filesystem::exists(dir_ / rel), "manifest references missing file '" + rel + "'");
    };
    for (const auto& c : j_["checkpoints"]) check(c["path"].get<std::string>());
    for (const auto& m : j_["metrics"]) check(m.get<std::string>());
    for (const auto& a : j_["artifacts"]) check(a.get<std::string>());
    std::ofstream out(path());
    require(static_cast<bool>(out), "cannot write manifest '" + path().string() + "'");
    out << j_.dump(2) << "\n";
  }

 private:
  void add_unique(const char* key, const std::string& file) {
    for (const auto& m : j_[key])
      if (m == file) return;
    j_[key].push_back(file);
  }

  std::filesystem::path dir_;
  nlohmann::ordered_json j_;
};

}  // namespace imgsmac::cli
