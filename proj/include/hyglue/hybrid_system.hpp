#pragma once

#include <optional>
#include <vector>

#include "hyglue/types.hpp"

namespace hyglue {

/// A hybrid system (C, f, D, g[, h]) on R^n. The flow set C is a
/// k-dimensional submanifold (k <= n); when k < n it is cut out by
/// r_c = 0. The jump set D and its image G = g(D) sit inside the zero
/// level sets of the scalar guards r_d and r_g, with
/// C contained in {r_d <= 0} and {r_g >= 0}. Because a level set may be
/// larger than the actual boundary component (both D and G can live in
/// the same hyperplane), membership in D is decided by `in_jump_set`,
/// not by the guard level alone.
struct HybridSystemDef {
  int n = 0;  ///< ambient state dimension
  int k = 0;  ///< manifold dimension of C
  int p = 0;  ///< input dimension
  int q = 0;  ///< output dimension (0 = no output map)

  FlowFn flow;
  JumpFn jump;
  OutputFn output;          ///< empty when q == 0
  ConstraintFn r_c;         ///< empty when k == n
  GuardFn r_d;
  GuardFn r_g;
  MemberFn in_flow_set;
  MemberFn in_jump_set;

  bool has_output() const { return static_cast<bool>(output); }
};

/// Ordered sequence of flow intervals [tau_i, tau_i'] with
/// tau_i' = tau_{i+1} and tau_0 = 0.
struct HybridTimeTrajectory {
  std::vector<std::pair<double, double>> intervals;

  int count() const { return static_cast<int>(intervals.size()); }
  /// Total flow time: sum of interval lengths.
  double total_time() const;
  bool well_formed(double tol = 1e-12) const;
};

struct Arc {
  std::vector<double> t;
  std::vector<Vec> x;
};

struct JumpRecord {
  double tau;  ///< jump instant tau_i'
  Vec pre;     ///< x(tau_i'^-)
  Vec post;    ///< x(tau_{i+1}) = g(pre)
};

/// One execution: a hybrid time trajectory together with densely sampled
/// continuous arcs and the jump records linking them.
struct HybridExecution {
  HybridTimeTrajectory time_traj;
  std::vector<Arc> arcs;
  std::vector<JumpRecord> jump_pairs;

  double end_time() const { return time_traj.total_time(); }
  std::vector<double> jump_times() const;
};

struct SimParams {
  double step = 1e-3;
  double event_tol = 1e-10;
  int max_jumps = 10000;
  double t_end = 10.0;
  /// Times where the input signal switches branches. Steps land exactly on
  /// these, and in-step stage times stay strictly left of the step end, so
  /// a right-continuous input is integrated with its left limit up to the
  /// switch.
  std::vector<double> input_breakpoints;

  void validate() const;
};

/// Simulates an execution from x0 with classical fixed-step RK4.
/// A jump fires when an arc crosses r_d = 0 into the jump set; the
/// crossing is bisected to within `event_tol` time units and accepted
/// only if the transversality margin grad(r_d) . f exceeds 1e-8 there.
HybridExecution simulate_hybrid(const HybridSystemDef& sys, const Vec& x0,
                                const InputFn& input, const SimParams& params);

/// Right-continuous state at time t: the value from interval i(t) with
/// t in [tau_i, tau_i'), linearly interpolated between stored samples.
Vec state_at(const HybridExecution& exec, double t);

enum class Boundary { Jump, Guard };

struct TransversalityReport {
  double min_margin = 0.0;
  Vec worst_point;
  bool pass = false;  ///< min_margin > mu
  double mu = 0.0;
};

/// Minimum of grad(r) . f(x[, u]) over boundary samples. Pass criterion is
/// min > mu (mu = 0 recovers the plain transversality requirement).
TransversalityReport check_transversality(const HybridSystemDef& sys, Boundary b,
                                          const std::vector<Vec>& samples,
                                          const std::vector<Vec>& input_samples = {},
                                          double mu = 0.0);

struct TangencyReport {
  double max_residual = 0.0;
  Vec worst_point;
  bool pass = false;  ///< max_residual <= 1e-7
};

/// Checks d(r_c)(x) f(x, u) = 0 over samples (flow tangent to C when k < n).
TangencyReport verify_flow_tangency(const HybridSystemDef& sys,
                                    const std::vector<Vec>& samples,
                                    const std::vector<Vec>& input_samples = {});

struct AssumptionReport {
  // Worst residuals over the sampled sets; negative margins mean failure.
  double manifold_residual = 0.0;     ///< max |r_c| on C samples
  double min_rank_margin = 1.0;       ///< min sigma_{n-k}(dr_c)/sigma_1 on C samples
  double tangency_residual = 0.0;     ///< max |dr_c f| on C samples
  double jump_guard_residual = 0.0;   ///< max |r_d| on D samples
  double image_guard_residual = 0.0;  ///< max |r_g(g(x))| on D samples
  bool image_in_flow_set = true;      ///< g(D) subset of C on samples
  bool jump_guard_disjoint = true;    ///< D and G disjoint on samples
  bool pass = false;
};

/// Samples the standing assumptions on C and D: the manifold constraint and
/// its rank, flow tangency, guard levels, and that g maps D into C away
/// from D itself.
AssumptionReport check_standing_assumptions(const HybridSystemDef& sys,
                                            const SamplerFn& flow_sampler,
                                            const SamplerFn& jump_sampler,
                                            const SamplerFn& input_sampler, Rng& rng,
                                            int n_samples = 200);

}  // namespace hyglue
