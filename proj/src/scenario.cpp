#include "hyglue/scenario.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include "hyglue/analysis.hpp"

namespace hyglue {

namespace {

constexpr const char* kToolVersion = "0.1.0";
constexpr int kSchemaVersion = 1;

SimParams sim_from_json(const json& j) {
  SimParams params;
  if (j.contains("step")) params.step = j["step"].get<double>();
  if (j.contains("event_tol")) params.event_tol = j["event_tol"].get<double>();
  if (j.contains("max_jumps")) params.max_jumps = j["max_jumps"].get<int>();
  if (j.contains("t_end")) params.t_end = j["t_end"].get<double>();
  return params;
}

double override_or(const std::map<std::string, double>& overrides,
                   const std::string& key, double fallback) {
  auto it = overrides.find(key);
  return it == overrides.end() ? fallback : it->second;
}

void reject_unknown(const std::map<std::string, double>& overrides,
                    std::initializer_list<const char*> known) {
  for (const auto& [key, value] : overrides) {
    (void)value;
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok) throw ConfigError("unknown parameter override: " + key);
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig cfg;
  if (!j.contains("model_id") || !j["model_id"].is_string())
    throw ConfigError("config requires a string model_id");
  cfg.model_id = j["model_id"].get<std::string>();
  if (!j.contains("mode") || !j["mode"].is_string())
    throw ConfigError("config requires a mode (estimate|track|certify|analyze)");
  cfg.mode = j["mode"].get<std::string>();
  if (cfg.mode != "estimate" && cfg.mode != "track" && cfg.mode != "certify" &&
      cfg.mode != "analyze")
    throw ConfigError("unknown mode: " + cfg.mode);

  if (j.contains("overrides"))
    for (const auto& [key, value] : j["overrides"].items())
      cfg.overrides[key] = value.get<double>();
  if (j.contains("sim")) cfg.sim = sim_from_json(j["sim"]);
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("epsilon")) cfg.epsilon = j["epsilon"].get<double>();
  if (j.contains("eps_grid"))
    cfg.eps_grid = j["eps_grid"].get<std::vector<double>>();
  if (j.contains("x0")) {
    const auto raw = j["x0"].get<std::vector<double>>();
    Vec x0(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) x0(i) = raw[i];
    cfg.x0 = x0;
  }
  if (j.contains("sweep")) {
    for (const auto& entry : j["sweep"]) {
      json merged = j;
      merged.erase("sweep");
      merged.update(entry);
      cfg.sweep.push_back(ScenarioConfig::from_json(merged));
    }
  }
  return cfg;
}

ScenarioConfig ScenarioConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

json ScenarioConfig::echo() const {
  json j{{"model_id", model_id}, {"mode", mode},       {"seed", seed},
         {"epsilon", epsilon},   {"out_dir", out_dir}, {"overrides", overrides}};
  j["sim"] = {{"step", sim.step},
              {"event_tol", sim.event_tol},
              {"max_jumps", sim.max_jumps},
              {"t_end", sim.t_end}};
  if (!eps_grid.empty()) j["eps_grid"] = eps_grid;
  if (x0) j["x0"] = to_json(*x0);
  return j;
}

void ModelRegistry::add(const std::string& id, const std::string& params_doc,
                        Factory factory) {
  factories_[id] = {params_doc, std::move(factory)};
}

ExampleBundle ModelRegistry::make(const std::string& id,
                                  const std::map<std::string, double>& overrides) const {
  auto it = factories_.find(id);
  if (it == factories_.end()) throw ModelNotFound("no model with id " + id);
  return it->second.second(overrides);
}

std::vector<std::pair<std::string, std::string>> ModelRegistry::list() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [id, entry] : factories_) out.emplace_back(id, entry.first);
  return out;
}

const ModelRegistry& ModelRegistry::builtin() {
  static const ModelRegistry registry = [] {
    ModelRegistry reg;
    reg.add("bouncing_ball", "rho, mass, delta_lo, delta_hi",
            [](const std::map<std::string, double>& o) {
              reject_unknown(o, {"rho", "mass", "delta_lo", "delta_hi"});
              return bouncing_ball(override_or(o, "rho", 1.0),
                                   override_or(o, "mass", 1.0),
                                   override_or(o, "delta_lo", 1.0),
                                   override_or(o, "delta_hi", 50.0));
            });
    reg.add("ripple", "(no parameters)", [](const std::map<std::string, double>& o) {
      reject_unknown(o, {});
      return ripple_model();
    });
    reg.add("reflected_di", "a11, a12, a21, a22, b, k1, k2",
            [](const std::map<std::string, double>& o) {
              reject_unknown(o, {"a11", "a12", "a21", "a22", "b", "k1", "k2"});
              return reflected_double_integrator(
                  override_or(o, "a11", 0.0), override_or(o, "a12", 1.0),
                  override_or(o, "a21", 0.0), override_or(o, "a22", 0.0),
                  override_or(o, "b", 1.0), override_or(o, "k1", -0.6),
                  override_or(o, "k2", -1.55));
            });
    return reg;
  }();
  return registry;
}

namespace {

struct Emitter {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> files;

  std::filesystem::path path(const std::string& name) {
    files.push_back(dir / name);
    return files.back();
  }
};

DwellEstimate dwell_from_bundle(const ExampleBundle& bundle, const SimParams& params,
                                const std::vector<double>& eps_grid, Rng& rng,
                                int n_traj) {
  std::vector<HybridExecution> trajs;
  for (int i = 0; i < n_traj; ++i) {
    const Vec x0 = bundle.inv_set.chart.map
                       ? bundle.inv_set.chart.map([&] {
                           Vec p(bundle.inv_set.chart.dim);
                           for (int d = 0; d < bundle.inv_set.chart.dim; ++d) {
                             std::uniform_real_distribution<double> dist(
                                 bundle.inv_set.chart.lo(d), bundle.inv_set.chart.hi(d));
                             p(d) = dist(rng);
                           }
                           return p;
                         }())
                       : bundle.x0;
    trajs.push_back(simulate_hybrid(bundle.sys, x0, zero_input(bundle.sys.p), params));
  }
  return estimate_dwell_function(trajs, eps_grid, bundle.d_in_e, bundle.g_in_e);
}

std::vector<double> default_eps_grid(double epsilon) {
  return {0.2 * epsilon, 0.5 * epsilon, epsilon, 2.0 * epsilon, 4.0 * epsilon};
}

bool run_estimate(const ScenarioConfig& cfg, const ExampleBundle& bundle,
                  Emitter& emit, json& summary, std::vector<std::string>& notes) {
  const Vec x0 = cfg.x0 ? *cfg.x0 : bundle.x0;
  SimParams params = cfg.sim;

  EstimationRun run;
  if (bundle.oi_observer) {
    const auto& oc = *bundle.oi_observer;
    const auto obs = make_output_injection_observer(oc.m, oc.poles, oc.inj, oc.phi);
    const Vec zeta_hat0 = project_to_invariant(bundle.glued, Vec::Zero(oc.m));
    run = run_output_injection_pipeline(bundle.sys, bundle.glued, obs, x0, zeta_hat0,
                                        params);
  } else if (bundle.ekf_observer) {
    const auto& ec = *bundle.ekf_observer;
    run = run_ekf_pipeline(bundle.sys, bundle.glued, ec.Q, ec.R, x0, ec.zeta_hat0,
                           params);
    notes.push_back(
        "observer substitution: continuous-discrete EKF stands in for a dedicated "
        "Lipschitz observer synthesis");
  } else {
    throw PipelineError("model " + bundle.id + " has no observer configuration");
  }

  reconstruct_estimate(bundle.glued, run.obs);
  write_execution_csv(emit.path("plant.csv"), run.plant);
  write_observer_csv(emit.path("observer.csv"), run.obs);

  Rng rng(cfg.seed);
  const auto eps_grid =
      cfg.eps_grid.empty() ? default_eps_grid(cfg.epsilon) : cfg.eps_grid;
  const auto dwell = dwell_from_bundle(bundle, params, eps_grid, rng, 5);
  write_dwell_csv(emit.path("dwell.csv"), dwell);

  const auto report = estimation_error_report(
      run.obs.t, run.x, run.obs.x_hat, run.plant.jump_times(),
      [&dwell](double e) { return dwell.alpha(e); }, cfg.epsilon);
  write_json(emit.path("error_report.json"), to_json(report));

  bool estimates_in_e = true;
  for (const Vec& xh : run.obs.x_hat)
    if (!bundle.inv_set.member(xh)) estimates_in_e = false;

  summary["error_report"] = to_json(report);
  summary["estimates_in_E"] = estimates_in_e;
  return report.converged && estimates_in_e;
}

bool run_track(const ScenarioConfig& cfg, const ExampleBundle& bundle, Emitter& emit,
               json& summary) {
  if (!bundle.tracking || !bundle.feedback || !bundle.affine)
    throw PipelineError("model " + bundle.id + " has no tracking configuration");
  const auto& tc = *bundle.tracking;

  SimParams params = cfg.sim;
  const auto ref = make_reference(bundle.sys, tc.r0, tc.u_r, params);
  Rng rng(cfg.seed);
  const auto gcs = build_matched_glued_control_system(bundle.sys, bundle.gm,
                                                      *bundle.affine, *bundle.feedback,
                                                      bundle.d_samples(rng, 50));
  (void)gcs;
  const auto law = linear_tracking_law(tc.K, tc.A, tc.B);
  const auto u_c = tracking_controller(*bundle.feedback, bundle.gm, law);
  const Vec x0 = cfg.x0 ? *cfg.x0 : bundle.x0;
  const auto run = simulate_closed_loop(bundle.sys, bundle.gm, u_c, ref, x0, params);

  write_tracking_csv(emit.path("tracking.csv"), run);
  write_execution_csv(emit.path("reference.csv"), ref.exec);

  const auto eps_grid =
      cfg.eps_grid.empty() ? default_eps_grid(cfg.epsilon) : cfg.eps_grid;
  const auto dwell = estimate_dwell_function({ref.exec}, eps_grid, bundle.d_in_e,
                                             bundle.g_in_e);
  write_dwell_csv(emit.path("dwell.csv"), dwell);

  const auto report = estimation_error_report(
      run.t, run.x, run.r, ref.jump_times,
      [&dwell](double e) { return dwell.alpha(e); }, cfg.epsilon);
  write_json(emit.path("tracking_report.json"), to_json(report));

  summary["tracking_report"] = to_json(report);
  summary["final_glued_err"] = run.glued_err.back();
  return report.converged;
}

bool run_certify(const ScenarioConfig& cfg, const ExampleBundle& bundle, Emitter& emit,
                 json& summary) {
  Rng rng(cfg.seed);
  const auto axioms =
      check_gluing_axioms(bundle.sys, bundle.gm, bundle.sampler, rng, 1000, 10000);
  write_json(emit.path("axioms.json"), to_json(axioms));

  const auto d_pts = bundle.d_samples(rng, 1000);
  json matching;
  bool matching_pass = true;
  if (bundle.feedback && bundle.affine) {
    const auto rep = check_relaxed_matching(bundle.sys, bundle.gm, *bundle.affine,
                                            *bundle.feedback, d_pts);
    matching["relaxed_matching"] = to_json(rep);
    matching_pass = rep.pass;
  } else {
    const auto rep = check_vector_field_matching(bundle.sys, bundle.gm, d_pts);
    matching["vector_field_matching"] = to_json(rep);
    matching_pass = rep.pass;
  }
  if (bundle.sys.has_output()) {
    const auto rep = check_output_matching(bundle.sys, d_pts);
    matching["output_matching"] = to_json(rep);
    matching_pass = matching_pass && rep.pass;
  }
  write_json(emit.path("matching.json"), matching);

  const auto trans = check_transversality(bundle.sys, Boundary::Jump, d_pts,
                                          bundle.u_samples(rng, 16));
  write_json(emit.path("transversality.json"), to_json(trans));

  const auto lips = estimate_glued_lipschitz(bundle.glued, 10000, rng, {}, bundle.sys.k);
  json lips_json{{"f_psi", to_json(lips.f)}};
  if (lips.h) lips_json["h_psi"] = to_json(*lips.h);
  write_json(emit.path("lipschitz.json"), lips_json);

  summary["axioms_pass"] = axioms.pass;
  summary["matching_pass"] = matching_pass;
  summary["transversality_pass"] = trans.pass;
  return axioms.pass && matching_pass && trans.pass;
}

bool run_analyze(const ScenarioConfig& cfg, const ExampleBundle& bundle, Emitter& emit,
                 json& summary) {
  Rng rng(cfg.seed);
  SimParams params = cfg.sim;

  const auto eps_grid = cfg.eps_grid.empty()
                            ? std::vector<double>{0.01, 0.02, 0.05, 0.1, 0.2}
                            : cfg.eps_grid;
  const auto dwell = dwell_from_bundle(bundle, params, eps_grid, rng, 8);
  write_dwell_csv(emit.path("dwell.csv"), dwell);
  write_json(emit.path("dwell.json"), to_json(dwell));

  // Bilipschitz constant over the working set with a guard-set margin.
  const double band = 0.1;
  SetSampler m_set;
  const auto& bundle_ref = bundle;
  m_set.member = [&bundle_ref, band](const Vec& x) {
    return bundle_ref.inv_set.member(x) &&
           distance_to_chart(bundle_ref.d_in_e, x) >= band;
  };
  m_set.sample = [&bundle_ref, band](Rng& r) {
    for (int tries = 0; tries < 256; ++tries) {
      Vec p(bundle_ref.inv_set.chart.dim);
      for (int d = 0; d < bundle_ref.inv_set.chart.dim; ++d) {
        std::uniform_real_distribution<double> dist(bundle_ref.inv_set.chart.lo(d),
                                                    bundle_ref.inv_set.chart.hi(d));
        p(d) = dist(r);
      }
      const Vec x = bundle_ref.inv_set.chart.map(p);
      if (distance_to_chart(bundle_ref.d_in_e, x) >= band) return x;
    }
    throw DegenerateSampler("analyze: cannot sample away from the jump set");
  };
  m_set.structured_pairs = band_edge_pairs(bundle.sys, bundle.d_in_e, band);
  const auto bilip = estimate_bilipschitz(bundle.gm, m_set, 20000, rng);
  write_json(emit.path("bilipschitz.json"), to_json(bilip));

  const auto lips = estimate_glued_lipschitz(bundle.glued, 10000, rng, {}, bundle.sys.k);
  json lips_json{{"f_psi", to_json(lips.f)}};
  if (lips.h) lips_json["h_psi"] = to_json(*lips.h);
  write_json(emit.path("lipschitz.json"), lips_json);

  summary["bilipschitz"] = to_json(bilip);
  summary["dwell_monotone"] = true;
  for (std::size_t i = 1; i < dwell.alpha_values.size(); ++i)
    if (dwell.alpha_values[i] < dwell.alpha_values[i - 1])
      summary["dwell_monotone"] = false;
  return summary["dwell_monotone"].get<bool>();
}

}  // namespace

RunArtifacts run_scenario(const ScenarioConfig& config, const ModelRegistry& registry) {
  const auto t_start = std::chrono::steady_clock::now();

  ExampleBundle bundle = registry.make(config.model_id, config.overrides);
  std::filesystem::create_directories(config.out_dir);

  Emitter emit;
  emit.dir = config.out_dir;
  json summary;
  std::vector<std::string> notes;
  bool pass = false;
  try {
    if (config.mode == "estimate")
      pass = run_estimate(config, bundle, emit, summary, notes);
    else if (config.mode == "track")
      pass = run_track(config, bundle, emit, summary);
    else if (config.mode == "certify")
      pass = run_certify(config, bundle, emit, summary);
    else
      pass = run_analyze(config, bundle, emit, summary);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(config.mode + " pipeline on " + config.model_id + ": " +
                        e.what());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  json manifest{{"schema_version", kSchemaVersion},
                {"tool_version", kToolVersion},
                {"config", config.echo()},
                {"wall_time_s", wall},
                {"substitutions", notes},
                {"summary", summary},
                {"checks_passed", pass}};
  json files = json::array();
  for (const auto& file : emit.files)
    files.push_back(
        {{"path", file.filename().string()}, {"fnv1a64", fnv1a64_hex(file)}});
  manifest["files"] = files;

  RunArtifacts artifacts;
  artifacts.manifest_path = config.out_dir / "manifest.json";
  write_json(artifacts.manifest_path, manifest);
  artifacts.files = emit.files;
  artifacts.checks_passed = pass;
  return artifacts;
}

std::vector<RunArtifacts> run_sweep(const ScenarioConfig& config, int jobs,
                                    const ModelRegistry& registry) {
  if (config.sweep.empty()) return {run_scenario(config, registry)};

  std::vector<ScenarioConfig> entries = config.sweep;
  for (std::size_t i = 0; i < entries.size(); ++i)
    entries[i].out_dir = config.out_dir / ("sweep_" + std::to_string(i));

  std::vector<RunArtifacts> results(entries.size());
  std::vector<std::string> errors(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= entries.size()) return;
      try {
        results[i] = run_scenario(entries[i], registry);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::max(1, std::min<int>(jobs, entries.size()));
  pool.reserve(n_workers);
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (std::size_t i = 0; i < entries.size(); ++i)
    if (!errors[i].empty())
      throw PipelineError("sweep entry " + std::to_string(i) + ": " + errors[i]);
  return results;
}

}  // namespace hyglue
