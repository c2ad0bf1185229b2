#include "hyglue/tracking.hpp"

#include <cmath>

namespace hyglue {

ReferenceBundle make_reference(const HybridSystemDef& sys, const Vec& r0,
                               const InputFn& u_r, const SimParams& params,
                               MemberFn r_set) {
  ReferenceBundle ref;
  ref.exec = simulate_hybrid(sys, r0, u_r, params);
  ref.u_r = u_r;
  ref.jump_times = ref.exec.jump_times();
  ref.r_set = std::move(r_set);
  return ref;
}

double reference_consistency_residual(const HybridSystemDef& sys,
                                      const ReferenceBundle& ref,
                                      const SimParams& params) {
  const HybridExecution replay = simulate_hybrid(sys, ref.r(0.0), ref.u_r, params);
  double worst = 0.0;
  for (std::size_t a = 0; a < replay.arcs.size(); ++a) {
    const Arc& arc = replay.arcs[a];
    for (std::size_t i = 0; i < arc.t.size(); ++i) {
      // Skip pre-jump endpoints: state_at is right-continuous there.
      if (a + 1 < replay.arcs.size() && i + 1 == arc.t.size()) continue;
      worst = std::max(worst,
                       (state_at(ref.exec, std::min(arc.t[i], ref.exec.end_time())) -
                        arc.x[i])
                           .norm());
    }
  }
  return worst;
}

std::function<Vec(double)> glued_reference(const GluingMap& gm,
                                           const ReferenceBundle& ref) {
  const HybridExecution exec = ref.exec;
  const auto psi = gm.psi;
  return [exec, psi](double t) {
    return psi(state_at(exec, std::min(t, exec.end_time())));
  };
}

ResidualReport check_relaxed_matching(const HybridSystemDef& sys, const GluingMap& gm,
                                      const InputAffine& affine,
                                      const MatchingFeedback& mf,
                                      const std::vector<Vec>& d_samples) {
  if (!affine.a || !affine.b)
    throw NotInputAffine("check_relaxed_matching: no input-affine decomposition");
  if (d_samples.empty()) throw EmptySampleSet("check_relaxed_matching: no samples");

  ResidualReport rep;
  rep.tol = 1e-8;
  for (const Vec& x : d_samples) {
    const Vec xg = sys.jump(x);
    const Mat dpx = gm.jacobian(x);
    const Mat dpg = gm.jacobian(xg);
    const Mat bg_x = dpx * affine.b(x) * mf.gamma(x);
    const Mat bg_g = dpg * affine.b(xg) * mf.gamma(xg);
    const double res_b = (bg_x - bg_g).norm();

    const Vec lhs_a = dpx * affine.a(x) + bg_x * mf.kappa(x);
    const Vec rhs_a = dpg * affine.a(xg) + bg_x * mf.kappa(xg);
    const double res_a = (lhs_a - rhs_a).norm();

    const double res = std::max(res_a, res_b);
    if (res > rep.max_residual) {
      rep.max_residual = res;
      rep.worst_point = x;
    }
  }
  rep.pass = rep.max_residual <= rep.tol;
  return rep;
}

GluedControlSystem build_matched_glued_control_system(const HybridSystemDef& sys,
                                                      const GluingMap& gm,
                                                      const InputAffine& affine,
                                                      const MatchingFeedback& mf,
                                                      const std::vector<Vec>& d_samples) {
  const ResidualReport rep = check_relaxed_matching(sys, gm, affine, mf, d_samples);
  if (!rep.pass)
    throw MatchingViolation("build_matched_glued_control_system: relaxed matching residual " +
                            std::to_string(rep.max_residual));

  GluedControlSystem gcs;
  gcs.gm = gm;
  const GluingMap g = gm;
  const InputAffine aff = affine;
  const MatchingFeedback fb = mf;
  gcs.a_psi_kg = [g, aff, fb](const Vec& zeta) {
    const Vec x = g.psi_inv(zeta);
    const Mat dp = g.jacobian(x);
    return (dp * aff.a(x) + dp * aff.b(x) * fb.gamma(x) * fb.kappa(x)).eval();
  };
  gcs.b_psi_g = [g, aff, fb](const Vec& zeta) {
    const Vec x = g.psi_inv(zeta);
    return (g.jacobian(x) * aff.b(x) * fb.gamma(x)).eval();
  };
  return gcs;
}

GluedTrackingLaw linear_tracking_law(const Mat& K, const Mat& A, const Mat& B) {
  const Mat closed = A + B * K;
  Eigen::EigenSolver<Mat> eig(closed);
  if (eig.eigenvalues().real().maxCoeff() > -1e-6)
    throw NotHurwitz("linear_tracking_law: A + B K is not Hurwitz");
  GluedTrackingLaw law;
  law.v_c = [K](const Vec& v_r, const Vec& zeta_r, const Vec& zeta) {
    return (K * (zeta - zeta_r) + v_r).eval();
  };
  return law;
}

TrackingController tracking_controller(const MatchingFeedback& mf, const GluingMap& gm,
                                       const GluedTrackingLaw& law) {
  const MatchingFeedback fb = mf;
  const GluingMap g = gm;
  const auto v_c = law.v_c;
  return [fb, g, v_c](const Vec& u_r, const Vec& r, const Vec& x) {
    const Mat gamma_r = fb.gamma(r);
    const Mat gamma_x = fb.gamma(x);
    if (std::abs(gamma_r.determinant()) <= 1e-8 ||
        std::abs(gamma_x.determinant()) <= 1e-8)
      throw SingularGamma("tracking_controller: gamma is singular along the run");
    const Vec v_r = gamma_r.partialPivLu().solve(u_r - fb.kappa(r));
    const Vec v = v_c(v_r, g.psi(r), g.psi(x));
    return (gamma_x * (v + fb.kappa(x))).eval();
  };
}

TrackingRun simulate_closed_loop(const HybridSystemDef& sys, const GluingMap& gm,
                                 const TrackingController& u_c,
                                 const ReferenceBundle& ref, const Vec& x0,
                                 const SimParams& params) {
  const ReferenceBundle& rb = ref;
  const InputFn input = [&rb, &u_c](double t, const Vec& x) {
    return u_c(rb.u_r(t, x), rb.r(t), x);
  };

  TrackingRun run;
  run.plant = simulate_hybrid(sys, x0, input, params);
  run.ref_jump_times = ref.jump_times;

  for (const Arc& arc : run.plant.arcs)
    for (std::size_t i = 0; i < arc.t.size(); ++i) {
      const double t = arc.t[i];
      const Vec& x = arc.x[i];
      const Vec r = ref.r(t);
      const Vec zeta = gm.psi(x);
      const Vec zeta_r = gm.psi(r);
      run.t.push_back(t);
      run.x.push_back(x);
      run.r.push_back(r);
      run.zeta.push_back(zeta);
      run.zeta_r.push_back(zeta_r);
      run.u_r.push_back(ref.u_r(t, x));
      run.u.push_back(u_c(ref.u_r(t, x), r, x));
      run.glued_err.push_back((zeta - zeta_r).norm());
    }
  return run;
}

}  // namespace hyglue
