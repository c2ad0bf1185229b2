#include "hyglue/gluing.hpp"

#include <cmath>

namespace hyglue {

namespace {

void track_worst(AxiomCheck& chk, double residual, const Vec& point) {
  if (residual > chk.worst_residual || chk.worst_point.size() == 0) {
    chk.worst_residual = residual;
    chk.worst_point = point;
  }
}

}  // namespace

GluingAxiomReport check_gluing_axioms(const HybridSystemDef& sys, const GluingMap& gm,
                                      const GluingSampler& sampler, Rng& rng,
                                      int n_samples, int n_pairs) {
  if (!sampler.flow || !sampler.jump)
    throw SamplerEmpty("check_gluing_axioms: sampler missing a stratum");

  GluingAxiomReport rep;

  // (G1) on D samples.
  rep.g1.pass = true;
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = sampler.jump(rng);
    const double res = (gm.psi(x) - gm.psi(sys.jump(x))).norm();
    track_worst(rep.g1, res, x);
  }
  rep.g1.pass = rep.g1.worst_residual <= 1e-9;

  // (G2) injectivity witness: psi-collisions must come from nearby points.
  rep.g2.pass = true;
  for (int i = 0; i < n_pairs; ++i) {
    const Vec x = sampler.flow(rng);
    Vec y;
    if (i % 4 == 0) {
      // Near pairs probe local collapse as well.
      std::normal_distribution<double> nd(0.0, 1e-7);
      y = x;
      for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += nd(rng);
    } else {
      y = sampler.flow(rng);
    }
    if ((x - y).norm() <= 1e-6) continue;
    const double psi_gap = (gm.psi(x) - gm.psi(y)).norm();
    if (psi_gap <= 1e-9) {
      rep.g2.pass = false;
      track_worst(rep.g2, (x - y).norm(), x);
    }
  }

  // (G3) Jacobian consistency and (G4) rank margin on C samples.
  rep.g3.pass = true;
  rep.g4.worst_residual = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = sampler.flow(rng);
    const Mat jac = gm.jacobian(x);
    const Mat jac_fd = fd_jacobian(gm.psi, x);
    const double rel =
        (jac - jac_fd).norm() / std::max(1.0, jac.norm());
    track_worst(rep.g3, rel, x);

    double margin;
    if (sys.k == sys.n) {
      Eigen::JacobiSVD<Mat> svd(jac);
      margin = svd.singularValues().tail(1)(0);
    } else {
      // Smallest |d_psi v| over unit v in ker(dr_c(x)).
      const Mat drc = fd_jacobian(sys.r_c, x);
      Eigen::JacobiSVD<Mat> svd(drc, Eigen::ComputeFullV);
      const Mat kernel = svd.matrixV().rightCols(sys.k);
      Eigen::JacobiSVD<Mat> svd2((jac * kernel).eval());
      margin = svd2.singularValues().tail(1)(0);
    }
    if (margin < rep.g4.worst_residual) {
      rep.g4.worst_residual = margin;
      rep.g4.worst_point = x;
    }
  }
  rep.g3.pass = rep.g3.worst_residual <= 1e-4;
  rep.g4.pass = rep.g4.worst_residual > 1e-8;

  // Inverse round-trip on C\D samples.
  rep.inverse.pass = true;
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = sampler.flow(rng);
    const double res = (gm.psi_inv(gm.psi(x)) - x).norm();
    track_worst(rep.inverse, res, x);
  }
  rep.inverse.pass = rep.inverse.worst_residual <= 1e-8;

  // (G5) probe: push samples outward along rays and watch |psi| grow.
  {
    double base = std::numeric_limits<double>::infinity();
    double outer = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 64; ++i) {
      const Vec x = sampler.flow(rng);
      if (x.norm() < 1e-9) continue;
      base = std::min(base, gm.psi(x).norm());
      outer = std::min(outer, gm.psi((100.0 / x.norm()) * x).norm());
    }
    rep.g5_probe.base_norm = base;
    rep.g5_probe.outer_norm = outer;
    rep.g5_probe.escaped = outer > 10.0 * std::max(base, 1e-12);
  }

  rep.pass = rep.g1.pass && rep.g2.pass && rep.g3.pass && rep.g4.pass &&
             rep.inverse.pass;
  return rep;
}

ResidualReport check_vector_field_matching(const HybridSystemDef& sys,
                                           const GluingMap& gm,
                                           const std::vector<Vec>& d_samples,
                                           const std::vector<Vec>& inputs) {
  if (d_samples.empty()) throw EmptySampleSet("check_vector_field_matching: no samples");
  std::vector<Vec> us = inputs;
  if (us.empty()) us.push_back(Vec::Zero(sys.p));

  ResidualReport rep;
  rep.tol = 1e-8;
  for (const Vec& x : d_samples) {
    const Vec xg = sys.jump(x);
    const Mat dpx = gm.jacobian(x);
    const Mat dpg = gm.jacobian(xg);
    for (const Vec& u : us) {
      const double res = (dpx * sys.flow(x, u) - dpg * sys.flow(xg, u)).norm();
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.worst_point = x;
      }
    }
  }
  rep.pass = rep.max_residual <= rep.tol;
  return rep;
}

ResidualReport check_output_matching(const HybridSystemDef& sys,
                                     const std::vector<Vec>& d_samples) {
  if (!sys.has_output()) throw NoOutputMap("check_output_matching: system has no output");
  if (d_samples.empty()) throw EmptySampleSet("check_output_matching: no samples");

  ResidualReport rep;
  rep.tol = 1e-9;
  for (const Vec& x : d_samples) {
    const double res = (sys.output(x) - sys.output(sys.jump(x))).norm();
    if (res > rep.max_residual) {
      rep.max_residual = res;
      rep.worst_point = x;
    }
  }
  rep.pass = rep.max_residual <= rep.tol;
  return rep;
}

GluedSystem build_glued_system(const HybridSystemDef& sys, const GluingMap& gm,
                               std::optional<InvariantSetSpec> inv_set,
                               const std::vector<Vec>& d_samples,
                               const GluedOverrides& overrides) {
  const ResidualReport match = check_vector_field_matching(sys, gm, d_samples);
  if (!match.pass)
    throw MatchingViolation("build_glued_system: vector field matching residual " +
                            std::to_string(match.max_residual));
  if (sys.has_output()) {
    const ResidualReport omatch = check_output_matching(sys, d_samples);
    if (!omatch.pass)
      throw MatchingViolation("build_glued_system: output matching residual " +
                              std::to_string(omatch.max_residual));
  }

  GluedSystem gs;
  gs.gm = gm;
  gs.invariant_set = std::move(inv_set);

  if (overrides.f_psi) {
    gs.f_psi = overrides.f_psi;
  } else {
    const GluingMap g = gm;
    const FlowFn f = sys.flow;
    const int p = sys.p;
    gs.f_psi = [g, f, p](const Vec& zeta) {
      const Vec x = g.psi_inv(zeta);
      return (g.jacobian(x) * f(x, Vec::Zero(p))).eval();
    };
  }
  if (overrides.h_psi) {
    gs.h_psi = overrides.h_psi;
  } else if (sys.has_output()) {
    const GluingMap g = gm;
    const OutputFn h = sys.output;
    gs.h_psi = [g, h](const Vec& zeta) { return h(g.psi_inv(zeta)); };
  }
  if (overrides.domain_test) {
    gs.domain_test = overrides.domain_test;
  } else {
    const GluingMap g = gm;
    const MemberFn in_c = sys.in_flow_set;
    gs.domain_test = [g, in_c](const Vec& zeta) {
      const Vec x = g.psi_inv(zeta);
      return in_c(x) && (g.psi(x) - zeta).norm() <= 1e-6 * std::max(1.0, zeta.norm());
    };
  }
  return gs;
}

Arc simulate_glued(const GluedSystem& gs, const Vec& zeta0, double t_end, double step) {
  if (!gs.domain_test(zeta0))
    throw LeftGluedDomain("simulate_glued: zeta0 outside the glued domain");

  Arc traj;
  double t = 0.0;
  Vec z = zeta0;
  traj.t.push_back(t);
  traj.x.push_back(z);
  const auto& f = gs.f_psi;
  while (t < t_end - 1e-15) {
    const double h = std::min(step, t_end - t);
    const Vec k1 = f(z);
    const Vec k2 = f(z + 0.5 * h * k1);
    const Vec k3 = f(z + 0.5 * h * k2);
    const Vec k4 = f(z + h * k3);
    z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
    if (!gs.domain_test(z))
      throw LeftGluedDomain("simulate_glued: trajectory left the glued domain at t = " +
                            std::to_string(t));
    traj.t.push_back(t);
    traj.x.push_back(z);
  }
  return traj;
}

Vec project_to_invariant(const GluedSystem& gs, const Vec& zeta_hat) {
  if (!gs.invariant_set || !gs.invariant_set->chart.map)
    throw NoParameterization("project_to_invariant: no invariant set parameterization");

  const BoxChart& e_chart = gs.invariant_set->chart;
  BoxChart image_chart;
  image_chart.dim = e_chart.dim;
  image_chart.lo = e_chart.lo;
  image_chart.hi = e_chart.hi;
  const auto psi = gs.gm.psi;
  const auto emap = e_chart.map;
  image_chart.map = [psi, emap](const Vec& p) { return psi(emap(p)); };

  return nearest_on_chart(image_chart, zeta_hat).point;
}

Vec unglue(const GluingMap& gm, const Vec& zeta, double tol) {
  const Vec x = gm.psi_inv(zeta);
  if ((gm.psi(x) - zeta).norm() > tol * std::max(1.0, zeta.norm()))
    throw NotInGluedDomain("unglue: zeta is not in the glued domain");
  return x;
}

}  // namespace hyglue
