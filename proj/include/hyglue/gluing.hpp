#pragma once

#include <optional>
#include <vector>

#include "hyglue/hybrid_system.hpp"
#include "hyglue/param_search.hpp"
#include "hyglue/types.hpp"

namespace hyglue {

/// A gluing function psi : C -> R^m identifying each jump-set point with
/// its image under g, together with its Jacobian and the inverse of its
/// restriction to C \ D. The inverse returns the G-side preimage on the
/// glued seam.
struct GluingMap {
  int n = 0;  ///< plant state dimension
  int m = 0;  ///< codomain dimension (m >= k)

  std::function<Vec(const Vec&)> psi;
  std::function<Mat(const Vec&)> d_psi_analytic;  ///< optional
  std::function<Vec(const Vec&)> psi_inv;

  /// Analytic Jacobian when supplied, forward differences (step 1e-6)
  /// otherwise.
  Mat jacobian(const Vec& x) const {
    return d_psi_analytic ? d_psi_analytic(x) : fd_jacobian(psi, x);
  }
};

/// Compact forward-invariant subset E of C, reachable through a chart for
/// projection searches.
struct InvariantSetSpec {
  MemberFn member;
  BoxChart chart;  ///< parameter box -> E
};

/// The jump-free system induced on the glued domain C^psi.
struct GluedSystem {
  GluingMap gm;
  std::function<Vec(const Vec&)> f_psi;
  std::function<Vec(const Vec&)> h_psi;  ///< empty when the plant has no output
  MemberFn domain_test;
  std::optional<InvariantSetSpec> invariant_set;

  bool has_output() const { return static_cast<bool>(h_psi); }
};

struct ResidualReport {
  double max_residual = 0.0;
  Vec worst_point;
  double tol = 0.0;
  bool pass = false;
};

struct AxiomCheck {
  bool pass = false;
  double worst_residual = 0.0;
  Vec worst_point;
};

/// Escape-to-infinity probe for properness: report-only, a finite sample
/// cannot certify it.
struct PropernessProbe {
  double base_norm = 0.0;   ///< min |psi| on the base shell
  double outer_norm = 0.0;  ///< min |psi| on the outermost probed shell
  bool escaped = false;     ///< outer_norm grew beyond the base by 10x
};

struct GluingAxiomReport {
  AxiomCheck g1;            ///< psi(x) = psi(g(x)) on D, tol 1e-9
  AxiomCheck g2;            ///< injectivity witness on C\D pairs
  AxiomCheck g3;            ///< FD/analytic Jacobian agreement, 1e-4 relative
  AxiomCheck g4;            ///< rank margin of d_psi, floor 1e-8
  AxiomCheck inverse;       ///< psi_inv(psi(x)) = x on C\D, tol 1e-8
  PropernessProbe g5_probe;
  bool pass = false;  ///< g1-g4 and the inverse round-trip
};

struct GluingSampler {
  SamplerFn flow;  ///< samples of C (away from D for pair checks)
  SamplerFn jump;  ///< samples of D
};

GluingAxiomReport check_gluing_axioms(const HybridSystemDef& sys, const GluingMap& gm,
                                      const GluingSampler& sampler, Rng& rng,
                                      int n_samples = 1000, int n_pairs = 10000);

/// max over D samples (and inputs, when given) of
/// |d_psi(x) f(x,u) - d_psi(g(x)) f(g(x),u)|; pass iff <= 1e-8.
ResidualReport check_vector_field_matching(const HybridSystemDef& sys,
                                           const GluingMap& gm,
                                           const std::vector<Vec>& d_samples,
                                           const std::vector<Vec>& inputs = {});

/// max over D samples of |h(x) - h(g(x))|; pass iff <= 1e-9.
ResidualReport check_output_matching(const HybridSystemDef& sys,
                                     const std::vector<Vec>& d_samples);

/// Closed-form overrides a model may register in place of the composed
/// defaults psi_inv-then-push-forward.
struct GluedOverrides {
  std::function<Vec(const Vec&)> f_psi;
  std::function<Vec(const Vec&)> h_psi;
  MemberFn domain_test;
};

/// Builds the glued system; refuses (MatchingViolation) when the vector
/// field or output matching fails on the supplied D samples.
GluedSystem build_glued_system(const HybridSystemDef& sys, const GluingMap& gm,
                               std::optional<InvariantSetSpec> inv_set,
                               const std::vector<Vec>& d_samples,
                               const GluedOverrides& overrides = {});

/// RK4 trajectory of the glued dynamics; no events. Throws LeftGluedDomain
/// when a grid state fails the domain test.
Arc simulate_glued(const GluedSystem& gs, const Vec& zeta0, double t_end, double step);

/// Nearest point of psi(E) to zeta_hat, via search over E's chart.
Vec project_to_invariant(const GluedSystem& gs, const Vec& zeta_hat);

/// Inverse gluing: the unique x in C\D with psi(x) = zeta (G-side on the
/// seam). Throws NotInGluedDomain when zeta fails the round-trip test.
Vec unglue(const GluingMap& gm, const Vec& zeta, double tol = 1e-8);

}  // namespace hyglue
