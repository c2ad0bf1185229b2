#include "hyglue/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace hyglue {

namespace {

struct QuotientTracker {
  double best = 0.0;
  long count = 0;
  Vec wa, wb;

  void offer(double q, const Vec& a, const Vec& b) {
    ++count;
    if (q > best) {
      best = q;
      wa = a;
      wb = b;
    }
  }
};

}  // namespace

LipschitzEstimate estimate_bilipschitz(const GluingMap& gm, const SetSampler& m_set,
                                       long n_pairs, Rng& rng) {
  if (!m_set.sample) throw DegenerateSampler("estimate_bilipschitz: no sampler");

  QuotientTracker tracker;
  long accepted = 0;
  auto offer_pair = [&](const Vec& x, const Vec& y) {
    const double den = (gm.psi(x) - gm.psi(y)).norm();
    if (den < 1e-12) return;
    ++accepted;
    tracker.offer((x - y).norm() / den, x, y);
  };

  for (const auto& [a, b] : m_set.structured_pairs) {
    if (m_set.member && (!m_set.member(a) || !m_set.member(b))) continue;
    offer_pair(a, b);
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double scales[] = {1e-2, 1e-4};
  for (long i = 0; i < n_pairs; ++i) {
    const Vec x = m_set.sample(rng);
    Vec y;
    if (i % 2 == 0) {
      y = m_set.sample(rng);
    } else {
      // Local pair: small perturbation kept inside M.
      const double sigma = scales[(i / 2) % 2] * std::max(1.0, x.norm());
      y = x;
      for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += sigma * gauss(rng);
      if (m_set.member && !m_set.member(y)) continue;
    }
    offer_pair(x, y);
  }

  if (accepted == 0)
    throw DegenerateSampler("estimate_bilipschitz: all pairs rejected");

  LipschitzEstimate est;
  est.constant = tracker.best;
  est.sample_count = tracker.count;
  est.witness_a = tracker.wa;
  est.witness_b = tracker.wb;
  est.mode = "bilipschitz_psi";
  return est;
}

std::vector<std::pair<Vec, Vec>> seam_straddling_pairs(
    const HybridSystemDef& sys, const std::vector<Vec>& d_points,
    const std::vector<double>& offsets) {
  std::vector<std::pair<Vec, Vec>> pairs;
  pairs.reserve(2 * d_points.size() * offsets.size());
  const Vec u0 = Vec::Zero(sys.p);
  for (const Vec& z : d_points) {
    const Vec zg = sys.jump(z);
    const Vec f_pre = sys.flow(z, u0);
    const Vec f_post = sys.flow(zg, u0);
    for (double s : offsets) {
      // Symmetric straddle, and a one-sided probe against the image point
      // itself (the worst fold pairs sit against the guard image).
      pairs.emplace_back(z - s * f_pre, zg + s * f_post);
      pairs.emplace_back(z - s * f_pre, zg);
    }
  }
  return pairs;
}

std::vector<std::pair<Vec, Vec>> band_edge_pairs(const HybridSystemDef& sys,
                                                 const BoxChart& d_set, double band,
                                                 int z_grid, int s_grid) {
  std::vector<std::pair<Vec, Vec>> pairs;
  const Vec u0 = Vec::Zero(sys.p);

  const int d = d_set.dim;
  int per_dim = std::max(2, static_cast<int>(std::ceil(std::pow(z_grid, 1.0 / d))));
  long total = 1;
  for (int i = 0; i < d; ++i) total *= per_dim;

  for (long flat = 0; flat < total; ++flat) {
    long rest = flat;
    Vec p(d);
    for (int i = 0; i < d; ++i) {
      const long gi = rest % per_dim;
      rest /= per_dim;
      p(i) = d_set.lo(i) +
             (d_set.hi(i) - d_set.lo(i)) * static_cast<double>(gi) / (per_dim - 1);
    }
    const Vec z = d_set.map(p);
    const Vec f_pre = sys.flow(z, u0);
    const double speed = f_pre.norm();
    if (speed < 1e-12) continue;
    const Vec zg = sys.jump(z);
    const Vec f_post = sys.flow(zg, u0);
    for (int k = 0; k < s_grid; ++k) {
      const double mult = 0.9 + (2.5 - 0.9) * static_cast<double>(k) / (s_grid - 1);
      const double s = band * mult / speed;
      const Vec a = z - s * f_pre;
      pairs.emplace_back(a, zg);
      pairs.emplace_back(a, zg + s * f_post);
    }
  }
  return pairs;
}

double DwellEstimate::alpha(double eps) const {
  if (eps_grid.empty()) return 0.0;
  if (eps <= 0.0) return 0.0;
  double t0 = 0.0, a0 = 0.0;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (eps <= eps_grid[i]) {
      const double w = (eps - t0) / (eps_grid[i] - t0);
      return a0 + w * (alpha_values[i] - a0);
    }
    t0 = eps_grid[i];
    a0 = alpha_values[i];
  }
  // Beyond the grid: extend with the last segment's slope.
  double slope = 0.0;
  if (eps_grid.size() >= 2) {
    const std::size_t k = eps_grid.size() - 1;
    slope = (alpha_values[k] - alpha_values[k - 1]) /
            std::max(eps_grid[k] - eps_grid[k - 1], 1e-300);
  } else if (eps_grid[0] > 0) {
    slope = alpha_values[0] / eps_grid[0];
  }
  return alpha_values.back() + slope * (eps - eps_grid.back());
}

DwellEstimate estimate_dwell_function(const std::vector<HybridExecution>& trajectories,
                                      const std::vector<double>& eps_grid,
                                      const BoxChart& d_set, const BoxChart& g_set) {
  DwellEstimate est;
  est.eps_grid = eps_grid;
  est.alpha_values.assign(eps_grid.size(), 0.0);

  bool any_jump = false;
  for (const HybridExecution& exec : trajectories) {
    std::vector<double> taus = exec.jump_times();
    taus.insert(taus.begin(), 0.0);
    if (exec.jump_pairs.size() > 0) any_jump = true;

    for (const Arc& arc : exec.arcs) {
      for (std::size_t i = 0; i < arc.t.size(); ++i) {
        const double dist = std::min(distance_to_chart(d_set, arc.x[i]),
                                     distance_to_chart(g_set, arc.x[i]));
        // Attribute the sample to the nearest jump instant.
        double gap = std::numeric_limits<double>::infinity();
        for (double tau : taus) gap = std::min(gap, std::abs(arc.t[i] - tau));
        for (std::size_t e = 0; e < eps_grid.size(); ++e)
          if (dist < eps_grid[e])
            est.alpha_values[e] = std::max(est.alpha_values[e], gap);
      }
    }
  }

  // Running max keeps the fit monotone in eps.
  for (std::size_t e = 1; e < est.alpha_values.size(); ++e)
    est.alpha_values[e] = std::max(est.alpha_values[e], est.alpha_values[e - 1]);
  est.no_jumps_warning = !any_jump;
  return est;
}

GluedLipschitzEstimates estimate_glued_lipschitz(
    const GluedSystem& gs, long n_pairs, Rng& rng,
    const std::vector<std::pair<Vec, Vec>>& seam_pairs, int manifold_dim) {
  if (!gs.invariant_set || !gs.invariant_set->chart.map)
    throw DegenerateSampler("estimate_glued_lipschitz: no invariant set chart");

  const BoxChart& chart = gs.invariant_set->chart;
  auto sample_zeta = [&](Rng& r) {
    Vec p(chart.dim);
    for (int i = 0; i < chart.dim; ++i) {
      std::uniform_real_distribution<double> dist(chart.lo(i), chart.hi(i));
      p(i) = dist(r);
    }
    return gs.gm.psi(chart.map(p));
  };

  QuotientTracker tf, th;
  auto offer = [&](const Vec& za, const Vec& zb) {
    const double den = (za - zb).norm();
    if (den < 1e-12) return;
    tf.offer((gs.f_psi(za) - gs.f_psi(zb)).norm() / den, za, zb);
    if (gs.has_output())
      th.offer((gs.h_psi(za) - gs.h_psi(zb)).norm() / den, za, zb);
  };

  for (const auto& [a, b] : seam_pairs) offer(gs.gm.psi(a), gs.gm.psi(b));
  for (long i = 0; i < n_pairs; ++i) offer(sample_zeta(rng), sample_zeta(rng));

  if (tf.count == 0)
    throw DegenerateSampler("estimate_glued_lipschitz: all pairs rejected");

  GluedLipschitzEstimates out;
  const bool heuristic = manifold_dim >= 0 && gs.gm.m > manifold_dim;
  out.f.constant = tf.best;
  out.f.sample_count = tf.count;
  out.f.witness_a = tf.wa;
  out.f.witness_b = tf.wb;
  out.f.mode = "lipschitz_f_psi";
  out.f.heuristic = heuristic;
  if (gs.has_output()) {
    LipschitzEstimate hh;
    hh.constant = th.best;
    hh.sample_count = th.count;
    hh.witness_a = th.wa;
    hh.witness_b = th.wb;
    hh.mode = "lipschitz_h_psi";
    hh.heuristic = heuristic;
    out.h = std::move(hh);
  }
  return out;
}

}  // namespace hyglue
