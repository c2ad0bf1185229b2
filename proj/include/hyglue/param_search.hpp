#pragma once

#include "hyglue/types.hpp"

namespace hyglue {

/// A compact set reached through a chart from a closed parameter box.
struct BoxChart {
  int dim = 0;
  Vec lo, hi;
  std::function<Vec(const Vec&)> map;  ///< box -> points of the set
};

struct NearestPointResult {
  Vec param;
  Vec point;
  double distance = 0.0;
};

/// Nearest point of a chart image to `target`: grid multistart over the
/// parameter box (ties broken by lowest grid index) followed by damped
/// Gauss-Newton refinement clamped to the box. The returned point always
/// lies in the chart image, and its distance never exceeds the best grid
/// candidate's.
NearestPointResult nearest_on_chart(const BoxChart& chart, const Vec& target,
                                    int grid_per_dim = 32);

/// Distance from `target` to the chart image.
inline double distance_to_chart(const BoxChart& chart, const Vec& target,
                                int grid_per_dim = 32) {
  return nearest_on_chart(chart, target, grid_per_dim).distance;
}

}  // namespace hyglue
