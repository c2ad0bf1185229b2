#include "hyglue/io.hpp"

#include <charconv>
#include <fstream>

namespace hyglue {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

void write_row(std::ofstream& out, double t, int interval, const Vec& x,
               const char* event) {
  out << format_double(t) << ',' << interval;
  for (Eigen::Index j = 0; j < x.size(); ++j) out << ',' << format_double(x(j));
  out << ',' << event << '\n';
}

}  // namespace

void write_execution_csv(const std::filesystem::path& path, const HybridExecution& exec) {
  auto out = open_out(path);
  const int n = exec.arcs.empty() || exec.arcs[0].x.empty()
                    ? 0
                    : static_cast<int>(exec.arcs[0].x[0].size());
  out << "t,interval_index";
  for (int j = 1; j <= n; ++j) out << ",x_" << j;
  out << ",event\n";
  for (std::size_t a = 0; a < exec.arcs.size(); ++a) {
    const Arc& arc = exec.arcs[a];
    const bool jumps_out = a + 1 < exec.arcs.size();
    for (std::size_t i = 0; i < arc.t.size(); ++i) {
      const char* event = "flow";
      if (jumps_out && i + 1 == arc.t.size()) event = "pre";
      if (a > 0 && i == 0) event = "post";
      write_row(out, arc.t[i], static_cast<int>(a), arc.x[i], event);
    }
  }
}

void write_glued_csv(const std::filesystem::path& path, const Arc& traj) {
  HybridExecution wrapper;
  wrapper.time_traj.intervals = {{traj.t.empty() ? 0.0 : traj.t.front(),
                                  traj.t.empty() ? 0.0 : traj.t.back()}};
  wrapper.arcs = {traj};
  write_execution_csv(path, wrapper);
}

void write_observer_csv(const std::filesystem::path& path, const ObserverRun& run) {
  auto out = open_out(path);
  const int m = run.zeta_hat.empty() ? 0 : static_cast<int>(run.zeta_hat[0].size());
  const bool projected = run.zeta_bar.size() == run.zeta_hat.size() &&
                         run.x_hat.size() == run.zeta_hat.size();
  const int n = projected && !run.x_hat.empty()
                    ? static_cast<int>(run.x_hat[0].size())
                    : 0;
  out << "t";
  for (int j = 1; j <= m; ++j) out << ",zeta_hat_" << j;
  if (projected) {
    for (int j = 1; j <= m; ++j) out << ",zeta_bar_" << j;
    for (int j = 1; j <= n; ++j) out << ",x_hat_" << j;
  }
  out << ",e_glued\n";
  for (std::size_t i = 0; i < run.t.size(); ++i) {
    out << format_double(run.t[i]);
    for (int j = 0; j < m; ++j) out << ',' << format_double(run.zeta_hat[i](j));
    if (projected) {
      for (int j = 0; j < m; ++j) out << ',' << format_double(run.zeta_bar[i](j));
      for (int j = 0; j < n; ++j) out << ',' << format_double(run.x_hat[i](j));
    }
    out << ',' << format_double(i < run.e_glued.size() ? run.e_glued[i] : 0.0) << '\n';
  }
}

void write_tracking_csv(const std::filesystem::path& path, const TrackingRun& run) {
  auto out = open_out(path);
  const int n = run.x.empty() ? 0 : static_cast<int>(run.x[0].size());
  const int m = run.zeta.empty() ? 0 : static_cast<int>(run.zeta[0].size());
  const int p = run.u.empty() ? 0 : static_cast<int>(run.u[0].size());
  out << "t";
  for (int j = 1; j <= n; ++j) out << ",x_" << j;
  for (int j = 1; j <= n; ++j) out << ",r_" << j;
  for (int j = 1; j <= m; ++j) out << ",zeta_" << j;
  for (int j = 1; j <= m; ++j) out << ",zeta_r_" << j;
  if (p == 1) {
    out << ",u,u_r";
  } else {
    for (int j = 1; j <= p; ++j) out << ",u_" << j;
    for (int j = 1; j <= p; ++j) out << ",u_r_" << j;
  }
  out << ",glued_err\n";
  for (std::size_t i = 0; i < run.t.size(); ++i) {
    out << format_double(run.t[i]);
    for (int j = 0; j < n; ++j) out << ',' << format_double(run.x[i](j));
    for (int j = 0; j < n; ++j) out << ',' << format_double(run.r[i](j));
    for (int j = 0; j < m; ++j) out << ',' << format_double(run.zeta[i](j));
    for (int j = 0; j < m; ++j) out << ',' << format_double(run.zeta_r[i](j));
    for (int j = 0; j < p; ++j) out << ',' << format_double(run.u[i](j));
    for (int j = 0; j < p; ++j) out << ',' << format_double(run.u_r[i](j));
    out << ',' << format_double(run.glued_err[i]) << '\n';
  }
}

void write_dwell_csv(const std::filesystem::path& path, const DwellEstimate& est) {
  auto out = open_out(path);
  out << "epsilon,alpha\n";
  for (std::size_t i = 0; i < est.eps_grid.size(); ++i)
    out << format_double(est.eps_grid[i]) << ',' << format_double(est.alpha_values[i])
        << '\n';
}

json to_json(const Vec& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json to_json(const AxiomCheck& chk) {
  return json{{"pass", chk.pass},
              {"worst_residual", chk.worst_residual},
              {"worst_point", to_json(chk.worst_point)}};
}

json to_json(const GluingAxiomReport& rep) {
  return json{{"G1", to_json(rep.g1)},
              {"G2", to_json(rep.g2)},
              {"G3", to_json(rep.g3)},
              {"G4", to_json(rep.g4)},
              {"inverse_roundtrip", to_json(rep.inverse)},
              {"G5_probe",
               {{"base_norm", rep.g5_probe.base_norm},
                {"outer_norm", rep.g5_probe.outer_norm},
                {"escaped", rep.g5_probe.escaped},
                {"note", "report-only: properness has no finite certificate"}}},
              {"pass", rep.pass}};
}

json to_json(const ResidualReport& rep) {
  return json{{"pass", rep.pass},
              {"max_residual", rep.max_residual},
              {"tol", rep.tol},
              {"worst_point", to_json(rep.worst_point)}};
}

json to_json(const TransversalityReport& rep) {
  return json{{"pass", rep.pass},
              {"min_margin", rep.min_margin},
              {"mu", rep.mu},
              {"worst_point", to_json(rep.worst_point)}};
}

json to_json(const ErrorReport& rep) {
  return json{{"epsilon", rep.epsilon},
              {"alpha", rep.alpha},
              {"T", rep.T},
              {"max_err_on_windows", rep.max_err_on_windows},
              {"excluded_measure", rep.excluded_measure},
              {"converged", rep.converged}};
}

json to_json(const LipschitzEstimate& est) {
  return json{{"constant", est.constant},
              {"sample_count", est.sample_count},
              {"mode", est.mode},
              {"heuristic", est.heuristic},
              {"witness_a", to_json(est.witness_a)},
              {"witness_b", to_json(est.witness_b)}};
}

json to_json(const DwellEstimate& est) {
  return json{{"eps_grid", est.eps_grid},
              {"alpha_values", est.alpha_values},
              {"no_jumps_warning", est.no_jumps_warning}};
}

json to_json(const AssumptionReport& rep) {
  return json{{"pass", rep.pass},
              {"manifold_residual", rep.manifold_residual},
              {"min_rank_margin", rep.min_rank_margin},
              {"tangency_residual", rep.tangency_residual},
              {"jump_guard_residual", rep.jump_guard_residual},
              {"image_guard_residual", rep.image_guard_residual},
              {"image_in_flow_set", rep.image_in_flow_set},
              {"jump_guard_disjoint", rep.jump_guard_disjoint}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::string fnv1a64_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for hashing");
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char chunk[4096];
  while (in.read(chunk, sizeof(chunk)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      hash ^= static_cast<unsigned char>(chunk[i]);
      hash *= 0x100000001b3ull;
    }
    if (!in) break;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace hyglue
