#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hyglue/gluing.hpp"
#include "hyglue/hybrid_system.hpp"
#include "hyglue/param_search.hpp"
#include "hyglue/types.hpp"

namespace hyglue {

/// Sampling lower bound for a Lipschitz-type constant, with the witness
/// pair that attains it. Never a certificate: adding samples can only
/// raise it.
struct LipschitzEstimate {
  double constant = 0.0;
  long sample_count = 0;
  Vec witness_a, witness_b;
  std::string mode;        ///< bilipschitz_psi | lipschitz_f_psi | lipschitz_h_psi
  bool heuristic = false;  ///< set when m > k puts the bound outside scope
};

/// A compact sampling set M avoiding one of D or G, with membership for
/// rejection of perturbed points and optional deterministic pairs (e.g.
/// fold-straddling sweeps) included in the maximization.
struct SetSampler {
  SamplerFn sample;
  MemberFn member;
  std::vector<std::pair<Vec, Vec>> structured_pairs;
};

/// max over admissible pairs of |x - y| / |psi(x) - psi(y)|; pairs with
/// denominator below 1e-12 are rejected. Half of the random budget goes to
/// local pairs (small perturbations kept inside M).
LipschitzEstimate estimate_bilipschitz(const GluingMap& gm, const SetSampler& m_set,
                                       long n_pairs, Rng& rng);

/// Perturbs jump-set points backward along the flow and their images
/// forward, producing pairs that straddle the glued seam.
std::vector<std::pair<Vec, Vec>> seam_straddling_pairs(
    const HybridSystemDef& sys, const std::vector<Vec>& d_points,
    const std::vector<double>& offsets);

/// Deterministic fold pairs tuned to a band-excluded sampling set: points
/// flowed backward off a jump-set grid until they clear the band, paired
/// against the corresponding guard-image points. These pin down the
/// estimator's maximum, which random pairs alone hit too rarely to
/// reproduce across seeds.
std::vector<std::pair<Vec, Vec>> band_edge_pairs(const HybridSystemDef& sys,
                                                 const BoxChart& d_set, double band,
                                                 int z_grid = 240, int s_grid = 60);

struct DwellEstimate {
  std::vector<double> eps_grid;
  std::vector<double> alpha_values;  ///< running max, monotone in eps
  bool no_jumps_warning = false;

  /// Monotone piecewise-linear interpolant through (0, 0); extended with
  /// the final slope beyond the grid.
  double alpha(double eps) const;
};

/// Estimates the dwell half-window: for each eps, the worst time distance
/// |t - tau_i| over jumps at which a trajectory sample still sits within
/// eps of D or G (distances measured against the supplied boundary charts).
DwellEstimate estimate_dwell_function(const std::vector<HybridExecution>& trajectories,
                                      const std::vector<double>& eps_grid,
                                      const BoxChart& d_set, const BoxChart& g_set);

struct GluedLipschitzEstimates {
  LipschitzEstimate f;
  std::optional<LipschitzEstimate> h;
};

/// max quotient of f^psi (and h^psi when present) over pairs in psi(E),
/// including the supplied seam-straddling pairs mapped through psi.
GluedLipschitzEstimates estimate_glued_lipschitz(
    const GluedSystem& gs, long n_pairs, Rng& rng,
    const std::vector<std::pair<Vec, Vec>>& seam_pairs = {}, int manifold_dim = -1);

}  // namespace hyglue
