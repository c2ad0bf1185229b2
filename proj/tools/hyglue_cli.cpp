#include <cstdio>
#include <iostream>

#include "CLI11.hpp"

#include "hyglue/scenario.hpp"

namespace {

// Exit-code contract: 0 = checks passed, 1 = checks ran and failed,
// 2 = configuration or usage error.
constexpr int kPass = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

std::map<std::string, double> parse_overrides(const std::vector<std::string>& kvs) {
  std::map<std::string, double> out;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw hyglue::ConfigError("--override expects key=value, got: " + kv);
    try {
      out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw hyglue::ConfigError("--override value is not a number: " + kv);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyglue: hybrid-system estimation and tracking on glued domains"};
  app.require_subcommand(1);

  std::string config_path, model_id, out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false, out_set = false;
  int jobs = 1;
  std::vector<std::string> override_kvs;

  auto* run = app.add_subcommand("run", "run a scenario config end to end");
  run->add_option("config", config_path, "scenario config JSON")->required();
  run->add_option("--out", out_dir)->each([&](const std::string&) { out_set = true; });
  run->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
  run->add_option("--jobs", jobs, "worker threads for sweep entries");
  run->add_option("--override", override_kvs, "key=value parameter override");

  auto* list = app.add_subcommand("list", "list available model bundles");

  auto* certify = app.add_subcommand("certify", "run the certification suite");
  certify->add_option("model_id", model_id)->required();
  certify->add_option("--out", out_dir)->each([&](const std::string&) { out_set = true; });
  certify->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }

  try {
    if (list->parsed()) {
      for (const auto& [id, doc] : hyglue::ModelRegistry::builtin().list())
        std::printf("%-16s %s\n", id.c_str(), doc.c_str());
      return kPass;
    }

    hyglue::ScenarioConfig cfg;
    if (run->parsed()) {
      cfg = hyglue::ScenarioConfig::from_file(config_path);
    } else {
      cfg.model_id = model_id;
      cfg.mode = "certify";
      cfg.out_dir = "out";
    }
    if (out_set) cfg.out_dir = out_dir;
    if (seed_set) cfg.seed = seed;
    for (const auto& [k, v] : parse_overrides(override_kvs)) cfg.overrides[k] = v;

    bool pass = true;
    for (const auto& artifacts : hyglue::run_sweep(cfg, jobs))
      pass = pass && artifacts.checks_passed;
    return pass ? kPass : kFail;
  } catch (const hyglue::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const hyglue::ModelNotFound& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
}
