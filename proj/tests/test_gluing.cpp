#include <cmath>

#include "doctest.h"
#include "hyglue/gluing.hpp"
#include "hyglue/models.hpp"

using namespace hyglue;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace

TEST_CASE("G1 holds with zero residual at the worked seam points") {
  const auto ball = bouncing_ball();
  const Vec x = v2(0.0, -2.0);
  CHECK((ball.gm.psi(x) - v3(0.0, 0.0, 8.0)).norm() == doctest::Approx(0.0));
  CHECK((ball.gm.psi(x) - ball.gm.psi(ball.sys.jump(x))).norm() <= 1e-12);

  const auto ripple = ripple_model();
  const Vec xr = v2(1.0, -std::sqrt(3.0));
  CHECK((ripple.gm.psi(xr) - v2(-2.0, 0.0)).norm() <= 1e-12);
  CHECK((ripple.gm.psi(xr) - ripple.gm.psi(ripple.sys.jump(xr))).norm() <= 1e-12);
}

TEST_CASE("identity map fails the gluing axioms on the ball") {
  const auto ball = bouncing_ball();
  GluingMap ident;
  ident.n = 2;
  ident.m = 2;
  ident.psi = [](const Vec& x) { return x; };
  ident.psi_inv = [](const Vec& z) { return z; };

  Rng rng(1);
  const auto rep = check_gluing_axioms(ball.sys, ident, ball.sampler, rng, 200, 500);
  CHECK_FALSE(rep.g1.pass);
  CHECK(rep.g1.worst_residual > 1.0);  // |x - (-x)| = 2 |x| on D
  CHECK_FALSE(rep.pass);
}

TEST_CASE("degenerate map fails the rank axiom") {
  const auto ball = bouncing_ball();
  GluingMap flat;
  flat.n = 2;
  flat.m = 3;
  flat.psi = [](const Vec&) { return Vec::Zero(3).eval(); };
  flat.psi_inv = [](const Vec&) { return Vec::Zero(2).eval(); };
  Rng rng(1);
  const auto rep = check_gluing_axioms(ball.sys, flat, ball.sampler, rng, 100, 200);
  CHECK_FALSE(rep.g4.pass);
}

TEST_CASE("axiom suite passes for every shipped bundle") {
  for (const auto& bundle :
       {bouncing_ball(), ripple_model(), reflected_double_integrator()}) {
    Rng rng(42);
    const auto rep = check_gluing_axioms(bundle.sys, bundle.gm, bundle.sampler, rng,
                                         1000, 10000);
    CAPTURE(bundle.id);
    CHECK(rep.g1.pass);
    CHECK(rep.g1.worst_residual <= 1e-9);
    CHECK(rep.g2.pass);
    CHECK(rep.g3.pass);
    CHECK(rep.g3.worst_residual <= 1e-4);
    CHECK(rep.g4.pass);
    CHECK(rep.g4.worst_residual > 1e-8);
    CHECK(rep.inverse.pass);
    CHECK(rep.g5_probe.escaped);
    CHECK(rep.pass);
  }
  const auto ball = bouncing_ball();
  Rng rng(3);
  CHECK_THROWS_AS(check_gluing_axioms(ball.sys, ball.gm, GluingSampler{}, rng, 10, 10),
                  SamplerEmpty);
}

TEST_CASE("vector field matching residuals") {
  const auto ball = bouncing_ball();
  const Vec xd = v2(0.0, -2.0);
  // d_psi(x) f(x) = (0, 8, 0) on both sides of the seam.
  CHECK((ball.gm.jacobian(xd) * ball.sys.flow(xd, Vec::Zero(0)) - v3(0.0, 8.0, 0.0))
            .norm() <= 1e-12);
  const auto rep = check_vector_field_matching(ball.sys, ball.gm, {xd});
  CHECK(rep.max_residual <= 1e-12);
  CHECK(rep.pass);

  // The mode-lifted integrator matches without input but misses by 2|u|
  // once the input acts.
  const auto di = reflected_double_integrator();
  const Vec xbar = v3(0.0, -2.0, 1.0);
  const auto rep0 = check_vector_field_matching(di.sys, di.gm, {xbar});
  CHECK(rep0.pass);
  const auto rep_u = check_vector_field_matching(di.sys, di.gm, {xbar},
                                                 {Vec::Constant(1, 1.5)});
  CHECK(rep_u.max_residual == doctest::Approx(3.0).epsilon(1e-9));
  CHECK_FALSE(rep_u.pass);
}

TEST_CASE("output matching") {
  const auto ball = bouncing_ball();
  Rng rng(5);
  CHECK(check_output_matching(ball.sys, ball.d_samples(rng, 100)).pass);

  const auto ripple = ripple_model();
  CHECK(check_output_matching(ripple.sys, ripple.d_samples(rng, 100)).pass);

  // Velocity output flips sign across the bounce.
  HybridSystemDef bad = ball.sys;
  bad.output = [](const Vec& x) { return Vec::Constant(1, x(1)); };
  const auto rep = check_output_matching(bad, {v2(0.0, -2.0)});
  CHECK(rep.max_residual == doctest::Approx(4.0));
  CHECK_FALSE(rep.pass);

  const auto di = reflected_double_integrator();
  CHECK_THROWS_AS(check_output_matching(di.sys, {v3(0.0, -1.0, 1.0)}), NoOutputMap);
}

TEST_CASE("glued vector field values at worked points") {
  const auto ball = bouncing_ball();
  const Vec f = ball.glued.f_psi(v3(4.0, -12.0, 26.0));
  CHECK((f - v3(-12.0, 14.0, 0.0)).norm() <= 1e-12);

  // Third glued coordinate never moves.
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec zeta = ball.gm.psi(ball.sampler.flow(rng));
    CHECK(std::abs(ball.glued.f_psi(zeta)(2)) <= 1e-12);
  }

  const auto ripple = ripple_model();
  CHECK((ripple.glued.f_psi(v2(-2.0, 0.0)) - v2(0.0, 6.0)).norm() <= 1e-12);

  // Finite difference of psi along the analytic rotation.
  auto zeta_of_t = [&ripple](double t) {
    return ripple.gm.psi(v2(2.0 * std::cos(t), -2.0 * std::sin(t)));
  };
  const double t0 = 0.3, h = 1e-5;
  const Vec fd = (zeta_of_t(t0 + h) - zeta_of_t(t0 - h)) / (2.0 * h);
  CHECK((fd - ripple.glued.f_psi(zeta_of_t(t0))).norm() <= 1e-6);
}

TEST_CASE("build_glued_system refuses unmatched gluings") {
  const auto ball = bouncing_ball();
  GluingMap ident;
  ident.n = 2;
  ident.m = 2;
  ident.psi = [](const Vec& x) { return x; };
  ident.psi_inv = [](const Vec& z) { return z; };
  CHECK_THROWS_AS(
      build_glued_system(ball.sys, ident, std::nullopt, {v2(0.0, -2.0)}, {}),
      MatchingViolation);
}

TEST_CASE("glued simulation matches the closed-form triple-speed rotation") {
  const auto ripple = ripple_model();
  const auto traj = simulate_glued(ripple.glued, v2(2.0, 0.0), 2.5, 1e-3);
  for (std::size_t i = 0; i < traj.t.size(); i += 50) {
    const double t = traj.t[i];
    const Vec oracle = v2(2.0 * std::cos(3.0 * t), -2.0 * std::sin(3.0 * t));
    CHECK((traj.x[i] - oracle).norm() <= 1e-6);
  }
  // Period 2 pi / 3; the off-grid query pays linear-interpolation error.
  const Vec back = state_at(HybridExecution{{{ {0.0, traj.t.back()} }}, {traj}, {}},
                            2.0 * M_PI / 3.0);
  CHECK((back - v2(2.0, 0.0)).norm() <= 5e-6);
}

TEST_CASE("pushforward of the hybrid flow equals the glued flow (ball)") {
  const auto ball = bouncing_ball();
  SimParams params;
  params.t_end = 3.0;
  const auto exec = simulate_hybrid(ball.sys, v2(2.0, -3.0), zero_input(), params);
  const auto glued = simulate_glued(ball.glued, ball.gm.psi(v2(2.0, -3.0)), 3.0, 1e-3);

  double worst = 0.0;
  for (std::size_t i = 0; i < glued.t.size(); i += 7) {
    const Vec zeta_hybrid = ball.gm.psi(state_at(exec, glued.t[i]));
    worst = std::max(worst, (zeta_hybrid - glued.x[i]).norm());
  }
  CHECK(worst <= 1e-5);

  // Glued energy coordinate stays put.
  for (std::size_t i = 0; i < glued.t.size(); ++i)
    CHECK(std::abs(glued.x[i](2) - 26.0) <= 1e-7);
}

TEST_CASE("constant field stays put and domain exits are reported") {
  GluedSystem gs;
  gs.gm.n = 2;
  gs.gm.m = 2;
  gs.gm.psi = [](const Vec& x) { return x; };
  gs.gm.psi_inv = [](const Vec& z) { return z; };
  gs.f_psi = [](const Vec&) { return Vec::Zero(2).eval(); };
  gs.domain_test = [](const Vec&) { return true; };
  const auto traj = simulate_glued(gs, v2(1.0, 2.0), 1.0, 1e-2);
  CHECK((traj.x.back() - v2(1.0, 2.0)).norm() == doctest::Approx(0.0));

  gs.f_psi = [](const Vec&) { return v2(1.0, 0.0); };
  gs.domain_test = [](const Vec& z) { return z.norm() <= 2.0; };
  CHECK_THROWS_AS(simulate_glued(gs, v2(1.9, 0.0), 1.0, 1e-2), LeftGluedDomain);
}

TEST_CASE("projection onto psi(E)") {
  const auto ball = bouncing_ball();

  const Vec member = v3(4.0, -12.0, 26.0);  // psi(2, -3), energy 6.5 inside [1, 50]
  CHECK((project_to_invariant(ball.glued, member) - member).norm() <= 1e-6);

  const Vec nudged = member + v3(0.0, 0.0, 1e-3);
  CHECK((project_to_invariant(ball.glued, nudged) - member).norm() <= 2e-3);

  // Dense-grid oracle for the projection of the origin.
  const Vec proj0 = project_to_invariant(ball.glued, Vec::Zero(3));
  double best = std::numeric_limits<double>::infinity();
  Vec best_zeta;
  for (int ie = 0; ie <= 400; ++ie)
    for (int iv = 0; iv <= 400; ++iv) {
      Vec p = v2(1.0 + (50.0 - 1.0) * ie / 400.0, -1.0 + 2.0 * iv / 400.0);
      const Vec zeta = ball.gm.psi(ball.inv_set.chart.map(p));
      if (zeta.norm() < best) {
        best = zeta.norm();
        best_zeta = zeta;
      }
    }
  CHECK(proj0.norm() <= best + 1e-6);
  CHECK((proj0 - v3(0.0, 0.0, 4.0)).norm() <= 1e-4);

  // Idempotence.
  Rng rng(2);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int i = 0; i < 20; ++i) {
    const Vec raw = v3(g(rng), g(rng), g(rng));
    const Vec once = project_to_invariant(ball.glued, raw);
    const Vec twice = project_to_invariant(ball.glued, once);
    CHECK((once - twice).norm() <= 1e-6);
  }

  GluedSystem no_param = ball.glued;
  no_param.invariant_set.reset();
  CHECK_THROWS_AS(project_to_invariant(no_param, member), NoParameterization);
}

TEST_CASE("unglue returns the G-side preimage") {
  const auto ball = bouncing_ball();
  CHECK((unglue(ball.gm, v3(4.0, -12.0, 26.0)) - v2(2.0, -3.0)).norm() <= 1e-9);
  CHECK((unglue(ball.gm, v3(0.0, 0.0, 8.0)) - v2(0.0, 2.0)).norm() <= 1e-9);

  const auto di = reflected_double_integrator();
  CHECK((unglue(di.gm, v2(3.0, 8.0)) - v3(3.0, 8.0, 1.0)).norm() == doctest::Approx(0.0));

  CHECK_THROWS_AS(unglue(ball.gm, v3(1.0, 5.0, 0.0)), NotInGluedDomain);

  // Seam consistency: unglue(psi(x)) recovers g(x) in G for x in D.
  Rng rng(9);
  for (const auto& bundle : {bouncing_ball(), ripple_model()}) {
    for (int i = 0; i < 50; ++i) {
      const Vec x = bundle.sampler.jump(rng);
      const Vec back = unglue(bundle.gm, bundle.gm.psi(x));
      CAPTURE(bundle.id);
      CHECK((back - bundle.sys.jump(x)).norm() <= 1e-8);
      CHECK(std::abs(bundle.sys.r_g(back)) <= 1e-8);
      CHECK_FALSE(bundle.sys.in_jump_set(back));
    }
  }
}
