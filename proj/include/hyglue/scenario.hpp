#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hyglue/io.hpp"
#include "hyglue/models.hpp"

namespace hyglue {

struct ScenarioConfig {
  std::string model_id;
  std::string mode;  ///< estimate | track | certify | analyze
  std::map<std::string, double> overrides;
  SimParams sim;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;
  double epsilon = 0.05;                  ///< error threshold for estimate/track
  std::vector<double> eps_grid;           ///< dwell grid (defaulted when empty)
  std::optional<Vec> x0;                  ///< plant initial state override
  std::vector<ScenarioConfig> sweep;      ///< independent entries for --jobs

  static ScenarioConfig from_json(const json& j);
  static ScenarioConfig from_file(const std::filesystem::path& path);
  json echo() const;
};

struct RunArtifacts {
  std::filesystem::path manifest_path;
  std::vector<std::filesystem::path> files;
  bool checks_passed = false;
};

class ModelRegistry {
 public:
  using Factory =
      std::function<ExampleBundle(const std::map<std::string, double>&)>;

  void add(const std::string& id, const std::string& params_doc, Factory factory);
  ExampleBundle make(const std::string& id,
                     const std::map<std::string, double>& overrides) const;
  /// Deterministic (sorted) listing of id -> parameter schema.
  std::vector<std::pair<std::string, std::string>> list() const;
  bool empty() const { return factories_.empty(); }

  /// Registry with the three shipped bundles.
  static const ModelRegistry& builtin();

 private:
  std::map<std::string, std::pair<std::string, Factory>> factories_;
};

/// Runs the configured pipeline end to end, writing CSVs, report JSONs, and
/// a manifest that hashes every emitted file. Returns whether all
/// configured pass/fail checks passed.
RunArtifacts run_scenario(const ScenarioConfig& config,
                          const ModelRegistry& registry = ModelRegistry::builtin());

/// Fans independent sweep entries out across `jobs` worker threads with
/// isolated output subdirectories. Returns the per-entry artifacts in
/// config order.
std::vector<RunArtifacts> run_sweep(const ScenarioConfig& config, int jobs,
                                    const ModelRegistry& registry =
                                        ModelRegistry::builtin());

}  // namespace hyglue
