#pragma once

#include <optional>
#include <vector>

#include "hyglue/gluing.hpp"
#include "hyglue/hybrid_system.hpp"
#include "hyglue/types.hpp"

namespace hyglue {

/// Scalar field on state space with an optional analytic gradient
/// (finite differences otherwise).
struct ScalarField {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  Vec grad(const Vec& x) const {
    return gradient ? gradient(x) : fd_gradient(value, x);
  }
};

/// Scalar function of a scalar with its derivative, used for output
/// transforms and injection terms.
struct ScalarMap {
  std::function<double(double)> f;
  std::function<double(double)> df;
};

inline ScalarMap identity_map() {
  return {[](double y) { return y; }, [](double) { return 1.0; }};
}

inline ScalarMap zero_map() {
  return {[](double) { return 0.0; }, [](double) { return 0.0; }};
}

/// Iterated Lie derivatives [h, L_f h, ..., L_f^order h] along the
/// autonomous field f. Each level's gradient comes from
/// `analytic_gradients[i]` when supplied, else finite differences chained
/// through the previous level (degraded accuracy, see the 1e-4 tolerance
/// on downstream checks).
std::vector<ScalarField> lie_derivative_chain(
    const std::function<Vec(const Vec&)>& f, const ScalarField& h0, int order,
    const std::vector<std::function<Vec(const Vec&)>>& analytic_gradients = {});

/// Observer in output-injection canonical coordinates:
///   d/dt zeta_hat = A zeta_hat + L (C zeta_hat - y*) + a(y*) + b_inj y
/// with A the m x m upper shift, C = (1, 0, ..., 0), y* = phi(y).
struct OutputInjectionObserver {
  Mat A;
  Eigen::RowVectorXd C_row;
  Vec L;
  std::function<Vec(double)> inj;      ///< a(y*) stacked, empty = zero
  std::function<double(double)> phi;   ///< output transform, empty = identity
  Vec b_inj;                           ///< extra injection times raw y, empty = none

  Vec rhs(const Vec& zeta_hat, double y) const;
};

/// Places eig(A + L C) at the given (real, negative) poles in the canonical
/// structure and verifies the Hurwitz margin (real parts <= -0.1).
OutputInjectionObserver make_output_injection_observer(
    int m, const std::vector<double>& poles, std::function<Vec(double)> inj = {},
    std::function<double(double)> phi = {}, Vec b_inj = Vec());

struct ObserverRun {
  std::vector<double> t;
  std::vector<Vec> zeta_hat;   ///< raw observer states
  std::vector<Vec> zeta_bar;   ///< projected onto psi(E)
  std::vector<Vec> x_hat;      ///< reconstructed plant estimates
  std::vector<double> e_glued; ///< |zeta - zeta_hat| when the plant is known
};

/// Uniformly sampled scalar signal.
struct SampledSignal {
  std::vector<double> t;
  std::vector<double> y;

  double max_gap() const;
  std::function<double(double)> interpolant() const;
};

/// Integrates the observer against a dense output signal.
ObserverRun run_output_injection_observer(const OutputInjectionObserver& obs,
                                          const std::function<double(double)>& y,
                                          const Vec& zeta_hat0, double t_end,
                                          double step);

/// Sampled-signal variant; requires samples at least as fine as the
/// integration step (SignalTooSparse otherwise).
ObserverRun run_output_injection_observer(const OutputInjectionObserver& obs,
                                          const SampledSignal& y, const Vec& zeta_hat0,
                                          double t_end, double step);

/// Continuous-discrete EKF on the glued system, with finite-difference
/// linearizations of f^psi and h^psi. Throws CovarianceDivergence when
/// trace(P) exceeds 1e6.
ObserverRun run_ekf_observer(const GluedSystem& gs,
                             const std::function<Vec(double)>& y, const Vec& zeta_hat0,
                             const Mat& Q, const Mat& R, double t_end, double step);

/// Fills zeta_bar = Pi_{psi(E)}(zeta_hat) and x_hat = psi_inv(zeta_bar).
void reconstruct_estimate(const GluedSystem& gs, ObserverRun& run);

struct ErrorReport {
  double epsilon = 0.0;
  double alpha = 0.0;              ///< half-window used
  double T = 0.0;                  ///< settling time (grid resolution)
  double max_err_on_windows = 0.0; ///< sup over included times beyond T
  double excluded_measure = 0.0;   ///< total time removed around jumps
  bool converged = false;
};

/// Removes alpha(eps)-radius windows around the jump instants (and t = 0),
/// then finds the least grid time T with sup of |x - x_hat| below eps on
/// the remaining times past T.
ErrorReport estimation_error_report(const std::vector<double>& t,
                                    const std::vector<Vec>& x,
                                    const std::vector<Vec>& x_hat,
                                    const std::vector<double>& jump_times,
                                    const std::function<double(double)>& alpha,
                                    double eps);

struct GraphicalClosenessReport {
  bool pass = false;
  double T_star = 0.0;
  double worst_t = 0.0;  ///< last time failing either direction
};

/// Checks the two-sided time-graph closeness: for each grid t past T*,
/// some s within the window has |(t, x(t)) - (s, x_hat(s))| < eps_star,
/// and symmetrically. The trailing `window` of the horizon is not scored
/// (no future samples to match against).
GraphicalClosenessReport graphical_closeness(const std::vector<double>& t,
                                             const std::vector<Vec>& x,
                                             const std::vector<Vec>& x_hat,
                                             double eps_star, double window);

/// Immersion-based gluing construction: psi stacks h* and its Lie
/// derivatives with the injection terms subtracted,
///   psi_j = L_f^{j-1} h* - sum_{i<j} L_f^{j-1-i} a_i(h*).
/// The identity L_f^m h* = a_m(h*) + L_f a_{m-1}(h*) + ... must hold on C;
/// the first m-1 Lie derivatives of h* must agree across the jump on D.
/// Callers still owe the injectivity/rank/properness axioms to
/// check_gluing_axioms.
struct ImmersionSpec {
  ScalarMap phi;                    ///< output transform
  std::vector<ScalarMap> a;         ///< injection terms a_1..a_m
  /// Analytic gradients of [h*, L_f h*, ..., L_f^{m-1} h*], optional.
  std::vector<std::function<Vec(const Vec&)>> h_chain_gradients;
  std::function<Vec(const Vec&)> psi_inv;  ///< optional closed-form inverse
};

GluingMap build_immersion_gluing(const HybridSystemDef& sys, const ImmersionSpec& spec,
                                 const std::vector<Vec>& d_samples,
                                 const std::vector<Vec>& c_samples,
                                 double i1_tol = 1e-6, double i2_tol = 1e-6);

/// d_psi(x) f(x) for an immersion gluing, evaluated through the Lie chains
/// rather than a Jacobian (the injection terms need not be differentiable
/// at the seam even when the glued field is fine there).
std::function<Vec(const Vec&)> immersion_pushforward(const HybridSystemDef& sys,
                                                     const ImmersionSpec& spec);

/// Plant and observer integrated on one grid; the observer sees the output
/// of the plant's own integration stages, so the glued error dynamics stay
/// exact up to integrator order.
struct EstimationRun {
  HybridExecution plant;
  ObserverRun obs;
  std::vector<Vec> x;     ///< plant states on the shared grid
  std::vector<Vec> zeta;  ///< psi(x) on the shared grid
};

EstimationRun run_output_injection_pipeline(const HybridSystemDef& sys,
                                            const GluedSystem& gs,
                                            const OutputInjectionObserver& obs,
                                            const Vec& x0, const Vec& zeta_hat0,
                                            const SimParams& params);

/// Plant simulation followed by an EKF against the interpolated output.
EstimationRun run_ekf_pipeline(const HybridSystemDef& sys, const GluedSystem& gs,
                               const Mat& Q, const Mat& R, const Vec& x0,
                               const Vec& zeta_hat0, const SimParams& params);

}  // namespace hyglue
