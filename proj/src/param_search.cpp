#include "hyglue/param_search.hpp"

#include <cmath>

namespace hyglue {

namespace {

Vec clamp_to_box(Vec p, const Vec& lo, const Vec& hi) {
  for (Eigen::Index i = 0; i < p.size(); ++i)
    p(i) = std::min(std::max(p(i), lo(i)), hi(i));
  return p;
}

}  // namespace

NearestPointResult nearest_on_chart(const BoxChart& chart, const Vec& target,
                                    int grid_per_dim) {
  if (chart.dim <= 0 || !chart.map)
    throw NoParameterization("nearest_on_chart: chart has no parameterization");

  const int d = chart.dim;
  long total = 1;
  for (int i = 0; i < d; ++i) total *= grid_per_dim;

  // Multistart grid scan; strict '<' keeps the lowest grid index on ties.
  Vec best_param(d);
  double best_dist = std::numeric_limits<double>::infinity();
  Vec idx_param(d);
  for (long flat = 0; flat < total; ++flat) {
    long rest = flat;
    for (int i = 0; i < d; ++i) {
      const long gi = rest % grid_per_dim;
      rest /= grid_per_dim;
      const double w =
          grid_per_dim == 1 ? 0.5 : static_cast<double>(gi) / (grid_per_dim - 1);
      idx_param(i) = chart.lo(i) + w * (chart.hi(i) - chart.lo(i));
    }
    const double dist = (chart.map(idx_param) - target).norm();
    if (dist < best_dist) {
      best_dist = dist;
      best_param = idx_param;
    }
  }

  // Damped Gauss-Newton on r(p) = target - map(p), clamped to the box.
  Vec p = best_param;
  double f_p = best_dist;
  const Vec scale = (chart.hi - chart.lo).cwiseMax(1e-12);
  double lambda = 1e-8;
  for (int iter = 0; iter < 80; ++iter) {
    Vec r = target - chart.map(p);
    Mat jac(r.size(), d);
    for (int j = 0; j < d; ++j) {
      const double h = 1e-7 * scale(j);
      Vec pp = p;
      pp(j) = std::min(pp(j) + h, chart.hi(j));
      const double hh = pp(j) - p(j);
      if (hh <= 0) {
        pp(j) = std::max(p(j) - h, chart.lo(j));
        jac.col(j) = (target - chart.map(pp) - r) / (pp(j) - p(j));
      } else {
        jac.col(j) = (target - chart.map(pp) - r) / hh;
      }
    }
    const Mat jtj = jac.transpose() * jac;
    const Vec g = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Mat damped = jtj + lambda * Mat::Identity(d, d);
      Vec delta = damped.ldlt().solve(-g);
      Vec p_new = clamp_to_box(p + delta, chart.lo, chart.hi);
      const double f_new = (chart.map(p_new) - target).norm();
      if (f_new < f_p) {
        const double step_size = (p_new - p).cwiseQuotient(scale).norm();
        p = p_new;
        f_p = f_new;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (step_size < 1e-12) iter = 80;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) break;
  }

  NearestPointResult res;
  if (f_p <= best_dist) {
    res.param = p;
    res.distance = f_p;
  } else {
    res.param = best_param;
    res.distance = best_dist;
  }
  res.point = chart.map(res.param);
  return res;
}

}  // namespace hyglue
