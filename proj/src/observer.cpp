#include "hyglue/observer.hpp"

#include <algorithm>
#include <cmath>

namespace hyglue {

std::vector<ScalarField> lie_derivative_chain(
    const std::function<Vec(const Vec&)>& f, const ScalarField& h0, int order,
    const std::vector<std::function<Vec(const Vec&)>>& analytic_gradients) {
  if (order < 0) throw OrderNonPositive("lie_derivative_chain: order must be >= 0");

  std::vector<ScalarField> chain;
  chain.reserve(order + 1);
  chain.push_back(h0);
  if (!analytic_gradients.empty() && analytic_gradients[0])
    chain[0].gradient = analytic_gradients[0];

  for (int i = 1; i <= order; ++i) {
    const ScalarField prev = chain.back();
    ScalarField next;
    next.value = [prev, f](const Vec& x) { return prev.grad(x).dot(f(x)); };
    if (static_cast<int>(analytic_gradients.size()) > i && analytic_gradients[i])
      next.gradient = analytic_gradients[i];
    chain.push_back(std::move(next));
  }
  return chain;
}

Vec OutputInjectionObserver::rhs(const Vec& zeta_hat, double y) const {
  const double y_star = phi ? phi(y) : y;
  Vec dz = A * zeta_hat + L * (C_row.dot(zeta_hat) - y_star);
  if (inj) dz += inj(y_star);
  if (b_inj.size() > 0) dz += b_inj * y;
  return dz;
}

OutputInjectionObserver make_output_injection_observer(
    int m, const std::vector<double>& poles, std::function<Vec(double)> inj,
    std::function<double(double)> phi, Vec b_inj) {
  if (m < 1) throw std::invalid_argument("observer dimension must be >= 1");
  if (static_cast<int>(poles.size()) != m)
    throw std::invalid_argument("pole count must match the observer dimension");

  OutputInjectionObserver obs;
  obs.A = Mat::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) obs.A(i, i + 1) = 1.0;
  obs.C_row = Eigen::RowVectorXd::Zero(m);
  obs.C_row(0) = 1.0;

  // Characteristic polynomial of A + L C in this structure is
  // s^m - l_1 s^{m-1} - ... - l_m; match it to prod (s - p_i).
  std::vector<double> coeff{1.0};
  for (double p : poles) {
    std::vector<double> next(coeff.size() + 1, 0.0);
    for (std::size_t i = 0; i < coeff.size(); ++i) {
      next[i] += coeff[i];
      next[i + 1] -= p * coeff[i];
    }
    coeff = std::move(next);
  }
  obs.L = Vec::Zero(m);
  for (int j = 1; j <= m; ++j) obs.L(j - 1) = -coeff[j];

  obs.inj = std::move(inj);
  obs.phi = std::move(phi);
  obs.b_inj = std::move(b_inj);

  const Mat closed = obs.A + obs.L * obs.C_row;
  Eigen::EigenSolver<Mat> eig(closed);
  if (eig.eigenvalues().real().maxCoeff() > -0.1 + 1e-9)
    throw NotHurwitz("make_output_injection_observer: closed loop misses the margin");
  return obs;
}

double SampledSignal::max_gap() const {
  double gap = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) gap = std::max(gap, t[i] - t[i - 1]);
  return gap;
}

std::function<double(double)> SampledSignal::interpolant() const {
  auto ts = t;
  auto ys = y;
  return [ts, ys](double s) {
    auto it = std::upper_bound(ts.begin(), ts.end(), s);
    if (it == ts.begin()) return ys.front();
    if (it == ts.end()) return ys.back();
    const std::size_t j = static_cast<std::size_t>(it - ts.begin());
    const double w = (s - ts[j - 1]) / (ts[j] - ts[j - 1]);
    return (1.0 - w) * ys[j - 1] + w * ys[j];
  };
}

ObserverRun run_output_injection_observer(const OutputInjectionObserver& obs,
                                          const std::function<double(double)>& y,
                                          const Vec& zeta_hat0, double t_end,
                                          double step) {
  ObserverRun run;
  double t = 0.0;
  Vec z = zeta_hat0;
  run.t.push_back(t);
  run.zeta_hat.push_back(z);
  while (t < t_end - 1e-15) {
    const double h = std::min(step, t_end - t);
    const Vec k1 = obs.rhs(z, y(t));
    const Vec k2 = obs.rhs(z + 0.5 * h * k1, y(t + 0.5 * h));
    const Vec k3 = obs.rhs(z + 0.5 * h * k2, y(t + 0.5 * h));
    const Vec k4 = obs.rhs(z + h * k3, y(t + h));
    z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
    run.t.push_back(t);
    run.zeta_hat.push_back(z);
  }
  return run;
}

ObserverRun run_output_injection_observer(const OutputInjectionObserver& obs,
                                          const SampledSignal& y, const Vec& zeta_hat0,
                                          double t_end, double step) {
  if (y.t.size() < 2 || y.max_gap() > step * (1.0 + 1e-9))
    throw SignalTooSparse("run_output_injection_observer: signal coarser than the step");
  return run_output_injection_observer(obs, y.interpolant(), zeta_hat0, t_end, step);
}

ObserverRun run_ekf_observer(const GluedSystem& gs,
                             const std::function<Vec(double)>& y, const Vec& zeta_hat0,
                             const Mat& Q, const Mat& R, double t_end, double step) {
  if (!gs.has_output()) throw NoOutputMap("run_ekf_observer: glued system has no output");
  const int m = static_cast<int>(zeta_hat0.size());

  ObserverRun run;
  double t = 0.0;
  Vec z = zeta_hat0;
  Mat P = Mat::Identity(m, m);
  run.t.push_back(t);
  run.zeta_hat.push_back(z);

  auto joint_rhs = [&gs, &Q](const Vec& zc, const Mat& Pc, Vec& dz, Mat& dP) {
    dz = gs.f_psi(zc);
    const Mat F = fd_jacobian(gs.f_psi, zc);
    dP = F * Pc + Pc * F.transpose() + Q;
  };

  while (t < t_end - 1e-15) {
    const double h = std::min(step, t_end - t);
    // Joint RK4 prediction of state and covariance.
    Vec k1z, k2z, k3z, k4z;
    Mat k1p, k2p, k3p, k4p;
    joint_rhs(z, P, k1z, k1p);
    joint_rhs(z + 0.5 * h * k1z, P + 0.5 * h * k1p, k2z, k2p);
    joint_rhs(z + 0.5 * h * k2z, P + 0.5 * h * k2p, k3z, k3p);
    joint_rhs(z + h * k3z, P + h * k3p, k4z, k4p);
    z = z + (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    P = P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    t += h;

    // Measurement update, Joseph form.
    const Mat H = fd_jacobian(gs.h_psi, z);
    const Mat S = H * P * H.transpose() + R;
    const Mat K = P * H.transpose() * S.inverse();
    z = z + K * (y(t) - gs.h_psi(z));
    const Mat M = Mat::Identity(m, m) - K * H;
    P = M * P * M.transpose() + K * R * K.transpose();

    if (P.trace() > 1e6)
      throw CovarianceDivergence("run_ekf_observer: covariance trace exceeded 1e6");
    run.t.push_back(t);
    run.zeta_hat.push_back(z);
  }
  return run;
}

void reconstruct_estimate(const GluedSystem& gs, ObserverRun& run) {
  run.zeta_bar.clear();
  run.x_hat.clear();
  run.zeta_bar.reserve(run.zeta_hat.size());
  run.x_hat.reserve(run.zeta_hat.size());
  for (const Vec& zh : run.zeta_hat) {
    Vec zb = project_to_invariant(gs, zh);
    run.x_hat.push_back(gs.gm.psi_inv(zb));
    run.zeta_bar.push_back(std::move(zb));
  }
}

ErrorReport estimation_error_report(const std::vector<double>& t,
                                    const std::vector<Vec>& x,
                                    const std::vector<Vec>& x_hat,
                                    const std::vector<double>& jump_times,
                                    const std::function<double(double)>& alpha,
                                    double eps) {
  ErrorReport rep;
  rep.epsilon = eps;
  rep.alpha = alpha(eps);

  std::vector<double> taus = jump_times;
  taus.push_back(0.0);
  std::sort(taus.begin(), taus.end());

  auto included = [&taus, &rep](double s) {
    for (double tau : taus)
      if (std::abs(s - tau) < rep.alpha) return false;
    return true;
  };

  // Measure of the union of exclusion windows within the horizon.
  if (!t.empty()) {
    const double horizon = t.back();
    double covered = 0.0, cursor = 0.0;
    for (double tau : taus) {
      const double lo = std::max(tau - rep.alpha, cursor);
      const double hi = std::min(tau + rep.alpha, horizon);
      if (hi > lo) covered += hi - lo;
      cursor = std::max(cursor, hi);
    }
    rep.excluded_measure = covered;
  }

  double last_bad = -1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!included(t[i])) continue;
    if ((x[i] - x_hat[i]).norm() >= eps) last_bad = std::max(last_bad, t[i]);
  }
  rep.T = std::max(last_bad, 0.0);

  double sup_tail = 0.0;
  bool any_tail = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= rep.T || !included(t[i])) continue;
    any_tail = true;
    sup_tail = std::max(sup_tail, (x[i] - x_hat[i]).norm());
  }
  rep.max_err_on_windows = sup_tail;
  rep.converged = any_tail && sup_tail < eps;
  return rep;
}

GraphicalClosenessReport graphical_closeness(const std::vector<double>& t,
                                             const std::vector<Vec>& x,
                                             const std::vector<Vec>& x_hat,
                                             double eps_star, double window) {
  GraphicalClosenessReport rep;
  if (t.empty()) return rep;
  const double score_end = t.back() - window;

  auto has_witness = [&](std::size_t i, const std::vector<Vec>& a,
                         const std::vector<Vec>& b) {
    // Find some s with |(t_i, a_i) - (s, b_s)| < eps*.
    const auto lo = std::lower_bound(t.begin(), t.end(), t[i] - window);
    const auto hi = std::upper_bound(t.begin(), t.end(), t[i] + window);
    for (auto it = lo; it != hi; ++it) {
      const std::size_t j = static_cast<std::size_t>(it - t.begin());
      const double dt = t[i] - t[j];
      const double dx = (a[i] - b[j]).norm();
      if (std::sqrt(dt * dt + dx * dx) < eps_star) return true;
    }
    return false;
  };

  double last_bad = -1.0;
  bool any_scored_after = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > score_end) break;
    const bool ok = has_witness(i, x, x_hat) && has_witness(i, x_hat, x);
    if (!ok) {
      last_bad = t[i];
    }
  }
  rep.T_star = std::max(last_bad, 0.0);
  rep.worst_t = std::max(last_bad, 0.0);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] > rep.T_star && t[i] <= score_end) any_scored_after = true;
  rep.pass = any_scored_after;
  return rep;
}

GluingMap build_immersion_gluing(const HybridSystemDef& sys, const ImmersionSpec& spec,
                                 const std::vector<Vec>& d_samples,
                                 const std::vector<Vec>& c_samples,
                                 double i1_tol, double i2_tol) {
  if (!sys.has_output())
    throw NoOutputMap("build_immersion_gluing: system has no output map");
  const int m = static_cast<int>(spec.a.size());
  if (m < 1) throw OrderNonPositive("build_immersion_gluing: need at least one a_i");

  const FlowFn flow = sys.flow;
  const int p = sys.p;
  const auto f0 = [flow, p](const Vec& x) { return flow(x, Vec::Zero(p)); };
  const OutputFn h = sys.output;
  const ScalarMap phi = spec.phi;

  ScalarField h_star;
  h_star.value = [h, phi](const Vec& x) { return phi.f(h(x)(0)); };
  h_star.gradient = [h, phi](const Vec& x) {
    const auto h0 = [h](const Vec& xx) { return h(xx)(0); };
    return (phi.df(h(x)(0)) * fd_gradient(h0, x)).eval();
  };

  const auto chain = lie_derivative_chain(f0, h_star, m, spec.h_chain_gradients);

  // Lie chains of the composites a_i(h*), each to the depth psi and the
  // identity check need.
  std::vector<std::vector<ScalarField>> comp;
  comp.reserve(m);
  for (int i = 0; i < m; ++i) {
    const ScalarMap ai = spec.a[i];
    ScalarField base;
    const ScalarField hs = chain[0];
    base.value = [ai, hs](const Vec& x) { return ai.f(hs.value(x)); };
    base.gradient = [ai, hs](const Vec& x) {
      return (ai.df(hs.value(x)) * hs.grad(x)).eval();
    };
    comp.push_back(lie_derivative_chain(f0, base, m - 1 - i >= 0 ? m - i : 0));
  }

  // (I1): the first m-1 Lie derivatives of h* agree across the jump.
  for (const Vec& x : d_samples) {
    const Vec xg = sys.jump(x);
    for (int i = 1; i <= m - 1; ++i) {
      const double res = std::abs(chain[i].value(x) - chain[i].value(xg));
      if (res > i1_tol)
        throw I1Violated("build_immersion_gluing: I1 residual " + std::to_string(res) +
                         " at Lie order " + std::to_string(i));
    }
  }

  // (I2): L_f^m h* = a_m(h*) + L_f a_{m-1}(h*) + ... + L_f^{m-1} a_1(h*).
  for (const Vec& x : c_samples) {
    double rhs = 0.0;
    for (int i = 1; i <= m; ++i) rhs += comp[i - 1][m - i].value(x);
    const double res = std::abs(chain[m].value(x) - rhs);
    if (res > i2_tol)
      throw I2Violated("build_immersion_gluing: I2 residual " + std::to_string(res));
  }

  GluingMap gm;
  gm.n = sys.n;
  gm.m = m;
  auto chain_copy = chain;
  auto comp_copy = comp;
  gm.psi = [chain_copy, comp_copy, m](const Vec& x) {
    Vec z(m);
    for (int j = 1; j <= m; ++j) {
      double v = chain_copy[j - 1].value(x);
      for (int i = 1; i <= j - 1; ++i) v -= comp_copy[i - 1][j - 1 - i].value(x);
      z(j - 1) = v;
    }
    return z;
  };
  gm.psi_inv = spec.psi_inv;
  return gm;
}

// d_psi(x) f(x) for an immersion gluing. Row j collapses algebraically to
// psi_{j+1}(x) + a_j(h*(x)) (and row m to a_m(h*(x)) via the identity), so
// it is evaluated from values alone; the injection terms need not be
// differentiable at the seam.
std::function<Vec(const Vec&)> immersion_pushforward(const HybridSystemDef& sys,
                                                     const ImmersionSpec& spec) {
  const OutputFn h = sys.output;
  const ScalarMap phi = spec.phi;
  const int m = static_cast<int>(spec.a.size());
  GluingMap gm;
  {
    HybridSystemDef copy = sys;
    // Rebuild psi without the seam checks; callers validated already.
    std::vector<Vec> empty;
    gm = build_immersion_gluing(sys, spec, empty, empty);
  }
  const auto psi = gm.psi;
  const auto a = spec.a;
  return [psi, a, h, phi, m](const Vec& x) {
    const double y_star = phi.f(h(x)(0));
    const Vec z = psi(x);
    Vec v(m);
    for (int j = 0; j + 1 < m; ++j) v(j) = z(j + 1) + a[j].f(y_star);
    v(m - 1) = a[m - 1].f(y_star);
    return v;
  };
}

namespace {

void append_grid(const HybridExecution& exec, std::vector<double>& t,
                 std::vector<Vec>& x) {
  for (const Arc& arc : exec.arcs)
    for (std::size_t i = 0; i < arc.t.size(); ++i) {
      t.push_back(arc.t[i]);
      x.push_back(arc.x[i]);
    }
}

}  // namespace

EstimationRun run_output_injection_pipeline(const HybridSystemDef& sys,
                                            const GluedSystem& gs,
                                            const OutputInjectionObserver& obs,
                                            const Vec& x0, const Vec& zeta_hat0,
                                            const SimParams& params) {
  if (!sys.has_output())
    throw NoOutputMap("run_output_injection_pipeline: plant has no output");
  const int n = sys.n;
  const int m = static_cast<int>(zeta_hat0.size());

  // The observer rides along as extra state so its forcing sees the plant's
  // own integration stages.
  HybridSystemDef aug;
  aug.n = n + m;
  aug.k = n + m;
  aug.p = sys.p;
  aug.q = 0;
  const FlowFn plant_flow = sys.flow;
  const OutputFn out = sys.output;
  aug.flow = [plant_flow, out, obs, n, m](const Vec& xz, const Vec& u) {
    const Vec x = xz.head(n);
    Vec dxz(n + m);
    dxz.head(n) = plant_flow(x, u);
    dxz.tail(m) = obs.rhs(xz.tail(m), out(x)(0));
    return dxz;
  };
  const JumpFn plant_jump = sys.jump;
  aug.jump = [plant_jump, n, m](const Vec& xz) {
    Vec next(n + m);
    next.head(n) = plant_jump(xz.head(n));
    next.tail(m) = xz.tail(m);
    return next;
  };
  const GuardFn rd = sys.r_d, rg = sys.r_g;
  aug.r_d = [rd, n](const Vec& xz) { return rd(xz.head(n).eval()); };
  aug.r_g = [rg, n](const Vec& xz) { return rg(xz.head(n).eval()); };
  const MemberFn in_c = sys.in_flow_set, in_d = sys.in_jump_set;
  aug.in_flow_set = [in_c, n](const Vec& xz) { return in_c(xz.head(n).eval()); };
  aug.in_jump_set = [in_d, n](const Vec& xz) { return in_d(xz.head(n).eval()); };

  Vec xz0(n + m);
  xz0.head(n) = x0;
  xz0.tail(m) = zeta_hat0;
  const HybridExecution joint = simulate_hybrid(aug, xz0, zero_input(sys.p), params);

  EstimationRun run;
  std::vector<double> t;
  std::vector<Vec> xz;
  append_grid(joint, t, xz);
  run.obs.t = t;
  for (const Vec& s : xz) {
    run.x.push_back(s.head(n));
    run.zeta.push_back(gs.gm.psi(s.head(n).eval()));
    run.obs.zeta_hat.push_back(s.tail(m));
    run.obs.e_glued.push_back((run.zeta.back() - run.obs.zeta_hat.back()).norm());
  }

  // Rebuild a plant-only execution for reporting.
  run.plant.time_traj = joint.time_traj;
  for (const Arc& arc : joint.arcs) {
    Arc plant_arc;
    plant_arc.t = arc.t;
    for (const Vec& s : arc.x) plant_arc.x.push_back(s.head(n));
    run.plant.arcs.push_back(std::move(plant_arc));
  }
  for (const JumpRecord& j : joint.jump_pairs)
    run.plant.jump_pairs.push_back(
        JumpRecord{j.tau, j.pre.head(n), j.post.head(n)});
  return run;
}

EstimationRun run_ekf_pipeline(const HybridSystemDef& sys, const GluedSystem& gs,
                               const Mat& Q, const Mat& R, const Vec& x0,
                               const Vec& zeta_hat0, const SimParams& params) {
  if (!sys.has_output()) throw NoOutputMap("run_ekf_pipeline: plant has no output");

  EstimationRun run;
  run.plant = simulate_hybrid(sys, x0, zero_input(sys.p), params);
  const HybridExecution& exec = run.plant;
  const OutputFn out = sys.output;
  auto y_fn = [&exec, out](double s) {
    return out(state_at(exec, std::min(s, exec.end_time())));
  };
  run.obs =
      run_ekf_observer(gs, y_fn, zeta_hat0, Q, R, exec.end_time(), params.step);

  // EKF grid is uniform; evaluate the plant on it for the error trace.
  for (std::size_t i = 0; i < run.obs.t.size(); ++i) {
    const Vec x = state_at(exec, std::min(run.obs.t[i], exec.end_time()));
    run.x.push_back(x);
    run.zeta.push_back(gs.gm.psi(x));
    run.obs.e_glued.push_back((run.zeta.back() - run.obs.zeta_hat[i]).norm());
  }
  return run;
}

}  // namespace hyglue
