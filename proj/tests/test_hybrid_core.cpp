#include <cmath>

#include "doctest.h"
#include "hyglue/hybrid_system.hpp"
#include "hyglue/models.hpp"

using namespace hyglue;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Test-only reference integrator, independent of the engine under test.
Vec rk4_reference(const FlowFn& f, const InputFn& u, Vec x, double t0, double t1,
                  double step) {
  double t = t0;
  while (t < t1 - 1e-15) {
    const double h = std::min(step, t1 - t);
    const Vec k1 = f(x, u(t, x));
    const Vec k2 = f(x + 0.5 * h * k1, u(t + 0.5 * h, x));
    const Vec k3 = f(x + 0.5 * h * k2, u(t + 0.5 * h, x));
    const Vec k4 = f(x + h * k3, u(t + h, x));
    x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return x;
}

const double kSqrt13 = std::sqrt(13.0);

}  // namespace

TEST_CASE("bouncing ball first jump matches the closed-form root") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 2.0;
  const auto exec = simulate_hybrid(bundle.sys, v2(2.0, -3.0), zero_input(), params);

  // x1(t) = 2 - 3t - t^2/2 hits zero at sqrt(13) - 3.
  const double tau1 = kSqrt13 - 3.0;
  REQUIRE(exec.jump_pairs.size() == 1);
  CHECK(exec.jump_pairs[0].tau == doctest::Approx(tau1).epsilon(1e-9));
  CHECK(exec.jump_pairs[0].pre(0) == doctest::Approx(0.0).scale(1).epsilon(1e-8));
  CHECK(exec.jump_pairs[0].pre(1) == doctest::Approx(-kSqrt13).epsilon(1e-9));
  CHECK(exec.jump_pairs[0].post(1) == doctest::Approx(kSqrt13).epsilon(1e-9));

  // Cross-check the event time against brute-force fine-step integration.
  Vec x = v2(2.0, -3.0);
  double t = 0.0;
  const double fine = 1e-5;
  while (x(0) >= 0.0) {
    x = rk4_reference(bundle.sys.flow, zero_input(), x, t, t + fine, fine);
    t += fine;
  }
  CHECK(std::abs(t - tau1) <= 2.0 * fine);
}

TEST_CASE("no guard crossing before t_end gives a single arc") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 0.3;  // first crossing is at ~0.6056
  const auto exec = simulate_hybrid(bundle.sys, v2(2.0, -3.0), zero_input(), params);
  CHECK(exec.jump_pairs.empty());
  CHECK(exec.time_traj.count() == 1);
  CHECK(exec.end_time() == doctest::Approx(0.3));
}

TEST_CASE("ripple model reaches the -60 degree ray at t = pi/3") {
  const auto bundle = ripple_model();
  SimParams params;
  params.t_end = 1.5;
  const auto exec = simulate_hybrid(bundle.sys, v2(2.0, 0.0), zero_input(), params);

  REQUIRE(exec.jump_pairs.size() == 1);
  // Clockwise rotation x(t) = (2 cos t, -2 sin t).
  CHECK(exec.jump_pairs[0].tau == doctest::Approx(M_PI / 3.0).epsilon(1e-9));
  CHECK(exec.jump_pairs[0].pre(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(exec.jump_pairs[0].pre(1) == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-7));
  CHECK(exec.jump_pairs[0].post(0) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(exec.jump_pairs[0].post(1) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-7));
}

TEST_CASE("state_at is right-continuous and matches re-integration") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 2.0;
  const auto exec = simulate_hybrid(bundle.sys, v2(2.0, -3.0), zero_input(), params);

  CHECK((state_at(exec, 0.0) - v2(2.0, -3.0)).norm() == doctest::Approx(0.0));

  // At the jump instant the post-jump value applies.
  const double tau1 = exec.jump_pairs[0].tau;
  const Vec at_jump = state_at(exec, tau1);
  CHECK(at_jump(1) == doctest::Approx(kSqrt13).epsilon(1e-9));

  // Strictly inside an arc: agree with direct re-integration.
  const Vec mid = state_at(exec, 0.37);
  const Vec oracle = rk4_reference(bundle.sys.flow, zero_input(), v2(2.0, -3.0), 0.0,
                                   0.37, 1e-5);
  CHECK((mid - oracle).norm() <= 1e-6);

  CHECK_THROWS_AS(state_at(exec, -0.1), OutOfHorizon);
  CHECK_THROWS_AS(state_at(exec, 2.5), OutOfHorizon);
}

TEST_CASE("transversality margins match hand evaluations") {
  const auto ball = bouncing_ball();
  const auto rep = check_transversality(ball.sys, Boundary::Jump, {v2(0.0, -2.0)});
  CHECK(rep.min_margin == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rep.pass);

  const auto ripple = ripple_model();
  const auto rep2 =
      check_transversality(ripple.sys, Boundary::Jump, {v2(1.0, -std::sqrt(3.0))});
  CHECK(rep2.min_margin == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(rep2.pass);

  // Zero field cannot be transversal.
  HybridSystemDef frozen = ball.sys;
  frozen.flow = [](const Vec&, const Vec&) { return v2(0.0, 0.0); };
  const auto rep3 = check_transversality(frozen, Boundary::Jump, {v2(0.0, -2.0)});
  CHECK(rep3.min_margin == doctest::Approx(0.0).scale(1).epsilon(1e-9));
  CHECK_FALSE(rep3.pass);

  CHECK_THROWS_AS(check_transversality(ball.sys, Boundary::Jump, {}), EmptySampleSet);
}

TEST_CASE("flow tangency for the mode-augmented system") {
  const auto di = reflected_double_integrator();
  Rng rng(7);
  const auto samples = di.c_samples(rng, 50);
  const auto us = di.u_samples(rng, 5);
  const auto rep = verify_flow_tangency(di.sys, samples, us);
  CHECK(rep.pass);
  CHECK(rep.max_residual <= 1e-7);

  // k = n: not applicable.
  const auto ball = bouncing_ball();
  CHECK_THROWS_AS(verify_flow_tangency(ball.sys, samples), NotApplicable);

  // A deliberately non-tangent field has residual 2 |p| * 0.1 = 0.2.
  HybridSystemDef bent = di.sys;
  const FlowFn base = di.sys.flow;
  bent.flow = [base](const Vec& x, const Vec& u) {
    Vec f = base(x, u);
    f(2) += 0.1;
    return f;
  };
  const auto rep2 = verify_flow_tangency(bent, samples, us);
  CHECK(rep2.max_residual == doctest::Approx(0.2).epsilon(1e-4));
  CHECK_FALSE(rep2.pass);
}

TEST_CASE("execution invariants: jump consistency, guard discipline, arcs in C") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 16.0;
  const auto exec = simulate_hybrid(bundle.sys, v2(2.0, -3.0), zero_input(), params);
  REQUIRE(exec.jump_pairs.size() >= 3);
  CHECK(exec.time_traj.well_formed());

  for (const auto& jump : exec.jump_pairs)
    CHECK((bundle.sys.jump(jump.pre) - jump.post).norm() <= 1e-7);

  // Positive flow time between consecutive jumps.
  for (std::size_t i = 1; i < exec.jump_pairs.size(); ++i)
    CHECK(exec.jump_pairs[i].tau - exec.jump_pairs[i - 1].tau > 1e-3);

  const double e0 = 1.0 * (1.0 * 2.0 + 0.5 * 9.0);
  for (const Arc& arc : exec.arcs)
    for (const Vec& x : arc.x) {
      CHECK(bundle.sys.in_flow_set(x));
      CHECK(bundle.sys.r_d(x) <= 1e-8);
      CHECK(bundle.sys.r_g(x) >= -1e-8);
      CHECK(std::abs(1.0 * x(0) + 0.5 * x(1) * x(1) - e0) <= 1e-6);
    }

  // |tau| equals the sum of interval lengths and the horizon.
  CHECK(exec.end_time() == doctest::Approx(16.0));
}

TEST_CASE("initial condition on the jump set fires immediately") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 0.5;
  const auto exec = simulate_hybrid(bundle.sys, v2(0.0, -3.0), zero_input(), params);
  REQUIRE(exec.jump_pairs.size() >= 1);
  CHECK(exec.jump_pairs[0].tau == 0.0);
  CHECK(exec.jump_pairs[0].post(1) == doctest::Approx(3.0));
  CHECK(exec.time_traj.intervals[0].first == 0.0);
  CHECK(exec.time_traj.intervals[0].second == 0.0);
}

TEST_CASE("jump budget and parameter validation") {
  const auto bundle = bouncing_ball();
  SimParams params;
  params.t_end = 16.0;
  params.max_jumps = 1;
  CHECK_THROWS_AS(simulate_hybrid(bundle.sys, v2(2.0, -3.0), zero_input(), params),
                  MaxJumpsExceeded);

  SimParams bad;
  bad.step = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SimParams{};
  bad.event_tol = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SimParams{};
  bad.max_jumps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("guard crossing outside the jump set reports an escape") {
  auto bundle = bouncing_ball();
  HybridSystemDef sys = bundle.sys;
  sys.in_jump_set = [](const Vec&) { return false; };
  SimParams params;
  params.t_end = 2.0;
  CHECK_THROWS_AS(simulate_hybrid(sys, v2(2.0, -3.0), zero_input(), params),
                  EscapedFlowSet);
}

TEST_CASE("tangential guard crossing is rejected as non-transversal") {
  HybridSystemDef sys;
  sys.n = 1;
  sys.k = 1;
  sys.p = 0;
  sys.q = 0;
  sys.flow = [](const Vec&, const Vec&) { return Vec::Constant(1, 1.0); };
  sys.jump = [](const Vec& x) { return (-x).eval(); };
  // Cubic guard: crosses zero at x = 1 with vanishing gradient.
  sys.r_d = [](const Vec& x) { return std::pow(x(0) - 1.0, 3); };
  sys.r_g = [](const Vec& x) { return -std::pow(x(0) - 1.0, 3); };
  sys.in_flow_set = [](const Vec&) { return true; };
  sys.in_jump_set = [](const Vec& x) { return std::abs(x(0) - 1.0) < 1e-3; };

  SimParams params;
  params.t_end = 2.0;
  CHECK_THROWS_AS(simulate_hybrid(sys, Vec::Zero(1), zero_input(), params),
                  NonTransversalEvent);
}

TEST_CASE("standing assumption sampling accepts all shipped bundles") {
  for (const auto& bundle :
       {bouncing_ball(), ripple_model(), reflected_double_integrator()}) {
    Rng rng(123);
    const auto rep = check_standing_assumptions(bundle.sys, bundle.sampler.flow,
                                                bundle.sampler.jump,
                                                bundle.input_sampler, rng, 300);
    CAPTURE(bundle.id);
    CHECK(rep.pass);
  }
}
