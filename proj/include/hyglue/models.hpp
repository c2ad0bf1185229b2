#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hyglue/gluing.hpp"
#include "hyglue/hybrid_system.hpp"
#include "hyglue/observer.hpp"
#include "hyglue/tracking.hpp"
#include "hyglue/types.hpp"

namespace hyglue {

struct OutputInjectionConfig {
  int m = 0;
  std::vector<double> poles;
  std::function<Vec(double)> inj;      ///< a(y*)
  std::function<double(double)> phi;   ///< output transform
};

struct EkfConfig {
  Mat Q, R;
  Vec zeta_hat0;
};

struct TrackingConfig {
  Mat K;       ///< glued-domain feedback gain
  Vec r0;      ///< reference initial state (augmented)
  InputFn u_r;
  /// Switch times of u_r up to a horizon, for breakpoint-aware integration.
  std::function<std::vector<double>(double)> u_r_breakpoints;
  Mat A, B;    ///< glued linear pair used for the Hurwitz check
  double t_end = 20.0;
};

/// A fully configured model: system, gluing map, invariant set, glued
/// system with closed-form overrides, samplers, and observer/controller
/// settings. Construction runs the applicable assumption and axiom checks
/// and throws ModelError on any failure.
struct ExampleBundle {
  std::string id;
  std::string params_doc;

  HybridSystemDef sys;
  GluingMap gm;
  InvariantSetSpec inv_set;
  GluedSystem glued;

  GluingSampler sampler;
  SamplerFn input_sampler;
  BoxChart d_in_e;  ///< jump set within the working compact set
  BoxChart g_in_e;  ///< its image within the working compact set

  std::optional<InputAffine> affine;
  std::optional<MatchingFeedback> feedback;
  std::optional<OutputInjectionConfig> oi_observer;
  std::optional<EkfConfig> ekf_observer;
  std::optional<TrackingConfig> tracking;

  Vec x0;
  double default_t_end = 10.0;

  std::vector<Vec> d_samples(Rng& rng, int count) const;
  std::vector<Vec> c_samples(Rng& rng, int count) const;
  std::vector<Vec> u_samples(Rng& rng, int count) const;
};

/// Ball bouncing on the floor with unit restitution: height/velocity
/// state, height output, jump g(x) = -x on {x1 = 0, x2 < 0}. The working
/// set is the energy band [delta_lo, delta_hi].
ExampleBundle bouncing_ball(double rho = 1.0, double mass = 1.0,
                            double delta_lo = 1.0, double delta_hi = 50.0);

/// Planar rotation on a 120-degree cone whose boundary rays are identified
/// by a reflection; the gluing map triples the polar angle, so the glued
/// dynamics rotate at triple speed.
ExampleBundle ripple_model();

/// Double integrator on the half plane {x1 >= 0} reflected through the
/// origin, lifted with a +-1 mode variable; tracking uses the mode sign as
/// the matching feedback.
ExampleBundle reflected_double_integrator(double a11 = 0.0, double a12 = 1.0,
                                          double a21 = 0.0, double a22 = 0.0,
                                          double b = 1.0, double k1 = -0.6,
                                          double k2 = -1.55);

}  // namespace hyglue
