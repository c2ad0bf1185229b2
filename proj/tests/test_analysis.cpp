#include <cmath>

#include "doctest.h"
#include "hyglue/analysis.hpp"
#include "hyglue/models.hpp"

using namespace hyglue;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

// Sampling set M = E \ O_D(band) for the ball, as used throughout.
SetSampler ball_band_set(const ExampleBundle& ball, double band) {
  SetSampler m_set;
  const auto member_e = ball.inv_set.member;
  const auto chart = ball.inv_set.chart;
  const auto d_in_e = ball.d_in_e;
  m_set.member = [member_e, d_in_e, band](const Vec& x) {
    return member_e(x) && distance_to_chart(d_in_e, x) >= band;
  };
  m_set.sample = [chart, d_in_e, band](Rng& rng) {
    for (int tries = 0; tries < 512; ++tries) {
      Vec p(2);
      std::uniform_real_distribution<double> de(chart.lo(0), chart.hi(0));
      std::uniform_real_distribution<double> dv(chart.lo(1), chart.hi(1));
      p << de(rng), dv(rng);
      const Vec x = chart.map(p);
      if (distance_to_chart(d_in_e, x) >= band) return x;
    }
    throw DegenerateSampler("ball_band_set: rejection sampling failed");
  };
  return m_set;
}

// Reference value for the band-0.1 constant, from an offline dense graded
// pair grid (220 x 260 parameter points).
constexpr double kBallBandConstant = 12.498;

}  // namespace

TEST_CASE("scaling map has the reciprocal constant") {
  GluingMap gm;
  gm.n = 2;
  gm.m = 2;
  gm.psi = [](const Vec& x) { return (2.0 * x).eval(); };
  gm.psi_inv = [](const Vec& z) { return (0.5 * z).eval(); };

  SetSampler ball_set;
  ball_set.member = [](const Vec& x) { return x.norm() <= 1.0; };
  ball_set.sample = [](Rng& rng) {
    std::uniform_real_distribution<double> d(-0.7, 0.7);
    return v2(d(rng), d(rng));
  };
  Rng rng(1);
  const auto est = estimate_bilipschitz(gm, ball_set, 5000, rng);
  CHECK(est.constant == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(est.mode == "bilipschitz_psi");
}

TEST_CASE("ball band constant: reproducible and consistent with brute force") {
  const auto ball = bouncing_ball();
  const double band = 0.1;
  auto m_set = ball_band_set(ball, band);
  m_set.structured_pairs = band_edge_pairs(ball.sys, ball.d_in_e, band);

  Rng rng_a(11), rng_b(99);
  const auto est_a = estimate_bilipschitz(ball.gm, m_set, 20000, rng_a);
  const auto est_b = estimate_bilipschitz(ball.gm, m_set, 20000, rng_b);

  CHECK(std::isfinite(est_a.constant));
  CHECK(std::abs(est_a.constant - est_b.constant) <= 0.05 * est_a.constant);
  CHECK(est_a.constant == doctest::Approx(kBallBandConstant).epsilon(0.08));

  // Witness soundness: the reported constant is attained by its pair.
  const double q = (est_a.witness_a - est_a.witness_b).norm() /
                   (ball.gm.psi(est_a.witness_a) - ball.gm.psi(est_a.witness_b)).norm();
  CHECK(q == doctest::Approx(est_a.constant).epsilon(1e-12));

  // Monotone refinement: a longer run with the same seed only raises it.
  Rng rng_c(11);
  const auto est_long = estimate_bilipschitz(ball.gm, m_set, 40000, rng_c);
  CHECK(est_long.constant >= est_a.constant - 1e-12);

  // Fresh pairs respect the bound.
  Rng fresh(1234);
  for (int i = 0; i < 2000; ++i) {
    const Vec x = m_set.sample(fresh);
    const Vec y = m_set.sample(fresh);
    const double den = (ball.gm.psi(x) - ball.gm.psi(y)).norm();
    if (den < 1e-12) continue;
    CHECK((x - y).norm() / den <= 1.1 * est_a.constant);
  }
}

TEST_CASE("shrinking the excluded band blows the constant up") {
  const auto ball = bouncing_ball();
  double previous = 0.0;
  for (double band : {1e-1, 1e-2, 1e-3}) {
    auto m_set = ball_band_set(ball, band);
    m_set.structured_pairs = band_edge_pairs(ball.sys, ball.d_in_e, band);
    Rng rng(7);
    const auto est = estimate_bilipschitz(ball.gm, m_set, 2000, rng);
    CHECK(est.constant > previous);
    previous = est.constant;
    CHECK(est.constant >= 0.5 / band);  // fold pairs scale like 1/x1
  }
}

TEST_CASE("degenerate samplers are rejected") {
  const auto ball = bouncing_ball();
  SetSampler m_set;
  Rng rng(1);
  CHECK_THROWS_AS(estimate_bilipschitz(ball.gm, m_set, 10, rng), DegenerateSampler);

  // All pairs collapse onto one point: every denominator is rejected
  // (membership keeps perturbed partners out as well).
  SetSampler constant_set;
  constant_set.sample = [](Rng&) { return v2(1.0, 1.0); };
  constant_set.member = [](const Vec& x) { return (x - v2(1.0, 1.0)).norm() == 0.0; };
  CHECK_THROWS_AS(estimate_bilipschitz(ball.gm, constant_set, 10, rng),
                  DegenerateSampler);
}

TEST_CASE("dwell estimate matches the impact-speed linearization") {
  const auto ball = bouncing_ball();
  SimParams params;
  params.t_end = 12.0;

  std::vector<HybridExecution> trajs;
  for (double e : {1.0, 1.05, 1.1, 1.2, 1.5, 2.0, 4.0, 8.0, 20.0, 49.0}) {
    Vec p = v2(e, 0.6);
    trajs.push_back(
        simulate_hybrid(ball.sys, ball.inv_set.chart.map(p), zero_input(), params));
  }

  const std::vector<double> eps_grid{0.005, 0.01, 0.02, 0.05, 0.1, 0.2};
  const auto est = estimate_dwell_function(trajs, eps_grid, ball.d_in_e, ball.g_in_e);
  CHECK_FALSE(est.no_jumps_warning);

  // Monotone and vanishing at small eps.
  for (std::size_t i = 1; i < est.alpha_values.size(); ++i)
    CHECK(est.alpha_values[i] >= est.alpha_values[i - 1]);
  CHECK(est.alpha(0.005) <= 0.01);

  // First-order law alpha ~ eps / min impact speed, with the minimum speed
  // sqrt(2 delta_lo) on the energy floor.
  const double ratio = est.alpha(0.1) / 0.1;
  CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.12));

  // The interpolant passes through (0, 0) and extends monotonically.
  CHECK(est.alpha(0.0) == 0.0);
  CHECK(est.alpha(0.3) >= est.alpha(0.2));

  // Held-out trajectories: no sample within eps of the boundary sets
  // outside the estimated windows.
  Rng rng(5);
  for (int k = 0; k < 5; ++k) {
    Vec p = v2(std::uniform_real_distribution<double>(1.2, 45.0)(rng),
               std::uniform_real_distribution<double>(-0.9, 0.9)(rng));
    const auto exec =
        simulate_hybrid(ball.sys, ball.inv_set.chart.map(p), zero_input(), params);
    std::vector<double> taus = exec.jump_times();
    taus.insert(taus.begin(), 0.0);
    for (const Arc& arc : exec.arcs)
      for (std::size_t i = 0; i < arc.t.size(); i += 3) {
        const double dist = std::min(distance_to_chart(ball.d_in_e, arc.x[i]),
                                     distance_to_chart(ball.g_in_e, arc.x[i]));
        for (double eps : eps_grid) {
          if (dist >= eps) continue;
          double gap = std::numeric_limits<double>::infinity();
          for (double tau : taus) gap = std::min(gap, std::abs(arc.t[i] - tau));
          CHECK(gap <= est.alpha(eps) + 1e-9);
        }
      }
  }
}

TEST_CASE("single-jump bracket gives the half-window directly") {
  const auto ball = bouncing_ball();
  SimParams params;
  params.t_end = 2.0;
  const auto exec =
      simulate_hybrid(ball.sys, v2(2.0, -3.0), zero_input(), params);
  REQUIRE(exec.jump_pairs.size() == 1);

  const auto est = estimate_dwell_function({exec}, {0.1}, ball.d_in_e, ball.g_in_e);
  // Impact speed sqrt(13): window ~ eps / speed, within grid resolution
  // and the quadratic correction.
  CHECK(est.alpha_values[0] == doctest::Approx(0.1 / std::sqrt(13.0)).epsilon(0.1));

  // A jump-free run only warns.
  SimParams quick = params;
  quick.t_end = 0.2;
  const auto no_jump =
      simulate_hybrid(ball.sys, v2(2.0, -3.0), zero_input(), quick);
  const auto warn = estimate_dwell_function({no_jump}, {0.1}, ball.d_in_e, ball.g_in_e);
  CHECK(warn.no_jumps_warning);
  CHECK(warn.alpha_values[0] == 0.0);
}

TEST_CASE("glued Lipschitz constants against closed forms") {
  const auto ripple = ripple_model();
  Rng rng(3);
  const auto d_pts = ripple.d_samples(rng, 50);
  const auto seam = seam_straddling_pairs(ripple.sys, d_pts, {1e-3, 1e-2});
  const auto est = estimate_glued_lipschitz(ripple.glued, 10000, rng, seam, ripple.sys.k);

  // The glued field is 3x a rotation: every quotient equals 3.
  CHECK(est.f.constant == doctest::Approx(3.0).epsilon(1e-6));
  CHECK_FALSE(est.f.heuristic);
  REQUIRE(est.h.has_value());

  // Dense-grid oracle for the output constant over psi(E).
  double oracle = 0.0;
  std::vector<Vec> zs;
  for (int ir = 0; ir <= 60; ++ir)
    for (int it = 0; it <= 120; ++it) {
      Vec p = v2(1.0 + 2.0 * ir / 60.0, -M_PI / 3 + (2.0 * M_PI / 3) * it / 120.0);
      zs.push_back(ripple.gm.psi(ripple.inv_set.chart.map(p)));
    }
  for (std::size_t i = 0; i < zs.size(); ++i)
    for (std::size_t j = i + 1; j < zs.size(); ++j) {
      const double den = (zs[i] - zs[j]).norm();
      if (den < 1e-9) continue;
      oracle = std::max(oracle,
                        (ripple.glued.h_psi(zs[i]) - ripple.glued.h_psi(zs[j])).norm() / den);
    }
  CHECK(est.h->constant == doctest::Approx(oracle).epsilon(0.05));

  // Constant field: zero constant.
  GluedSystem frozen = ripple.glued;
  frozen.f_psi = [](const Vec&) { return v2(1.0, 1.0); };
  Rng rng2(4);
  const auto zero_est = estimate_glued_lipschitz(frozen, 500, rng2);
  CHECK(zero_est.f.constant == 0.0);

  // m > k flags the estimate as heuristic.
  const auto ball = bouncing_ball();
  Rng rng3(5);
  const auto ball_est = estimate_glued_lipschitz(ball.glued, 2000, rng3, {}, ball.sys.k);
  CHECK(ball_est.f.heuristic);
}

TEST_CASE("seam pairs map close under psi") {
  const auto ball = bouncing_ball();
  Rng rng(6);
  const auto pairs = seam_straddling_pairs(ball.sys, ball.d_samples(rng, 20), {1e-4});
  for (const auto& [a, b] : pairs)
    CHECK((ball.gm.psi(a) - ball.gm.psi(b)).norm() <= 1e-2 * (a - b).norm());
}
