#include "hyglue/hybrid_system.hpp"

#include <algorithm>
#include <cmath>

namespace hyglue {

Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, double step) {
  const Vec f0 = fn(x);
  Mat jac(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x;
    xp(j) += step;
    jac.col(j) = (fn(xp) - f0) / step;
  }
  return jac;
}

Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, double step) {
  const double f0 = fn(x);
  Vec grad(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x;
    xp(j) += step;
    grad(j) = (fn(xp) - f0) / step;
  }
  return grad;
}

double HybridTimeTrajectory::total_time() const {
  double sum = 0.0;
  for (const auto& [a, b] : intervals) sum += b - a;
  return sum;
}

bool HybridTimeTrajectory::well_formed(double tol) const {
  if (intervals.empty()) return false;
  if (std::abs(intervals.front().first) > tol) return false;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].second < intervals[i].first - tol) return false;
    if (i + 1 < intervals.size() &&
        std::abs(intervals[i].second - intervals[i + 1].first) > tol)
      return false;
  }
  return true;
}

std::vector<double> HybridExecution::jump_times() const {
  std::vector<double> taus;
  taus.reserve(jump_pairs.size());
  for (const auto& j : jump_pairs) taus.push_back(j.tau);
  return taus;
}

void SimParams::validate() const {
  if (step <= 0) throw std::invalid_argument("SimParams: step must be positive");
  if (event_tol >= step)
    throw std::invalid_argument("SimParams: event_tol must be smaller than step");
  if (max_jumps < 1) throw std::invalid_argument("SimParams: max_jumps must be >= 1");
  if (t_end < 0) throw std::invalid_argument("SimParams: t_end must be non-negative");
}

namespace {

Vec rk4_step(const FlowFn& f, const InputFn& input, double t, const Vec& x, double h) {
  // Input stage times sit strictly inside (t, t+h). A cadlag input that
  // switches at either step boundary is then sampled on the branch the
  // step actually integrates: the left limit at the end of a step, the
  // incoming branch at the start of a post-event step. Events localize
  // only to event_tol, so arc boundaries can sit an ulp off a switch time.
  const double t_first = t + h * 1e-12;
  const double t_last = t + h * (1.0 - 1e-12);
  const Vec k1 = f(x, input(t_first, x));
  const Vec x2 = x + 0.5 * h * k1;
  const Vec k2 = f(x2, input(t + 0.5 * h, x2));
  const Vec x3 = x + 0.5 * h * k2;
  const Vec k3 = f(x3, input(t + 0.5 * h, x3));
  const Vec x4 = x + h * k3;
  const Vec k4 = f(x4, input(t_last, x4));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

constexpr double kTransversalityFloor = 1e-8;

}  // namespace

HybridExecution simulate_hybrid(const HybridSystemDef& sys, const Vec& x0,
                                const InputFn& input, const SimParams& params) {
  params.validate();
  if (!sys.in_flow_set(x0) && !sys.in_jump_set(x0))
    throw EscapedFlowSet("simulate_hybrid: x0 is neither in C nor in D");

  HybridExecution exec;
  double t = 0.0;
  Vec x = x0;
  int jumps = 0;

  auto open_arc = [&exec](double t0, const Vec& xa) {
    exec.arcs.push_back(Arc{{t0}, {xa}});
    exec.time_traj.intervals.emplace_back(t0, t0);
  };
  auto close_arc_at = [&exec](double tc) { exec.time_traj.intervals.back().second = tc; };

  auto record_jump = [&](double tau, const Vec& pre) {
    Vec post = sys.jump(pre);
    if (!sys.in_flow_set(post))
      throw EscapedFlowSet("simulate_hybrid: jump image left the flow set");
    if (sys.in_jump_set(post))
      throw ModelError("simulate_hybrid: jump image lies in D (consecutive jumps)");
    exec.jump_pairs.push_back(JumpRecord{tau, pre, post});
    ++jumps;
    if (jumps > params.max_jumps)
      throw MaxJumpsExceeded("simulate_hybrid: jump count exceeded max_jumps");
    return post;
  };

  open_arc(0.0, x);

  // Initial condition on the jump set: zero-length first interval.
  if (sys.in_jump_set(x) && std::abs(sys.r_d(x)) <= 1e-9) {
    close_arc_at(0.0);
    x = record_jump(0.0, x);
    open_arc(0.0, x);
  }

  std::vector<double> breaks = params.input_breakpoints;
  std::sort(breaks.begin(), breaks.end());

  while (t < params.t_end - 1e-15) {
    double h = std::min(params.step, params.t_end - t);
    const auto bp = std::upper_bound(breaks.begin(), breaks.end(), t + 1e-12);
    if (bp != breaks.end()) h = std::min(h, *bp - t);
    const Vec x_next = rk4_step(sys.flow, input, t, x, h);
    const double rd_now = sys.r_d(x);
    const double rd_next = sys.r_d(x_next);

    // Upcrossing of the guard level: bracket and bisect the event time.
    if (rd_now < 0.0 && rd_next >= 0.0) {
      double lo = 0.0, hi = h;
      Vec x_hi = x_next;
      while (hi - lo > params.event_tol) {
        const double mid = 0.5 * (lo + hi);
        const Vec x_mid = rk4_step(sys.flow, input, t, x, mid);
        if (sys.r_d(x_mid) >= 0.0) {
          hi = mid;
          x_hi = x_mid;
        } else {
          lo = mid;
        }
      }
      double tau = t + hi;
      const Vec x_event = x_hi;
      // Events are localized only to event_tol; when one coincides with an
      // input switch, snap the bookkeeping time onto it so the next arc
      // integrates on the correct input branch from its very first stage.
      if (!breaks.empty()) {
        const auto nb = std::lower_bound(breaks.begin(), breaks.end(), tau);
        if (nb != breaks.end() && std::abs(*nb - tau) <= 10.0 * params.event_tol)
          tau = *nb;
        else if (nb != breaks.begin() &&
                 std::abs(*(nb - 1) - tau) <= 10.0 * params.event_tol)
          tau = *(nb - 1);
      }

      const Vec u_event = input(tau, x_event);
      const Vec grad = fd_gradient(sys.r_d, x_event);
      const double margin = grad.dot(sys.flow(x_event, u_event));
      if (margin < kTransversalityFloor)
        throw NonTransversalEvent(
            "simulate_hybrid: guard crossing with transversality margin below 1e-8");

      if (sys.in_jump_set(x_event)) {
        Arc& arc = exec.arcs.back();
        if (!arc.t.empty() && tau - arc.t.back() <= 1e-12) {
          // The event coincides with the last grid sample; keep one row.
          arc.t.back() = tau;
          arc.x.back() = x_event;
        } else {
          arc.t.push_back(tau);
          arc.x.push_back(x_event);
        }
        close_arc_at(tau);
        x = record_jump(tau, x_event);
        t = tau;
        open_arc(tau, x);
        continue;
      }
      // Crossing the guard level outside D: the state is leaving C.
      throw EscapedFlowSet("simulate_hybrid: guard crossed outside the jump set");
    }

    if (!sys.in_flow_set(x_next))
      throw EscapedFlowSet("simulate_hybrid: arc left the flow set away from D");

    t += h;
    x = x_next;
    exec.arcs.back().t.push_back(t);
    exec.arcs.back().x.push_back(x);
    close_arc_at(t);
  }

  return exec;
}

Vec state_at(const HybridExecution& exec, double t) {
  const double horizon = exec.end_time();
  if (t < 0.0 || t > horizon + 1e-12)
    throw OutOfHorizon("state_at: requested time outside [0, |tau|]");

  // Right-continuity: pick the interval with t in [tau_i, tau_i'); the last
  // interval also owns its right endpoint.
  const auto& ivs = exec.time_traj.intervals;
  std::size_t idx = ivs.size() - 1;
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    if (t >= ivs[i].first && (t < ivs[i].second || (i + 1 == ivs.size()))) {
      idx = i;
      break;
    }
  }

  const Arc& arc = exec.arcs[idx];
  if (arc.t.size() == 1) return arc.x.front();
  auto it = std::upper_bound(arc.t.begin(), arc.t.end(), t);
  if (it == arc.t.begin()) return arc.x.front();
  if (it == arc.t.end()) return arc.x.back();
  const std::size_t j = static_cast<std::size_t>(it - arc.t.begin());
  const double t0 = arc.t[j - 1], t1 = arc.t[j];
  if (t1 - t0 <= 0) return arc.x[j];
  const double w = (t - t0) / (t1 - t0);
  return (1.0 - w) * arc.x[j - 1] + w * arc.x[j];
}

TransversalityReport check_transversality(const HybridSystemDef& sys, Boundary b,
                                          const std::vector<Vec>& samples,
                                          const std::vector<Vec>& input_samples,
                                          double mu) {
  if (samples.empty()) throw EmptySampleSet("check_transversality: no samples");
  const GuardFn& guard = (b == Boundary::Jump) ? sys.r_d : sys.r_g;

  std::vector<Vec> inputs = input_samples;
  if (inputs.empty()) inputs.push_back(Vec::Zero(sys.p));

  TransversalityReport rep;
  rep.mu = mu;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const Vec& x : samples) {
    const Vec grad = fd_gradient(guard, x);
    for (const Vec& u : inputs) {
      const double margin = grad.dot(sys.flow(x, u));
      if (margin < rep.min_margin) {
        rep.min_margin = margin;
        rep.worst_point = x;
      }
    }
  }
  rep.pass = rep.min_margin > mu;
  return rep;
}

TangencyReport verify_flow_tangency(const HybridSystemDef& sys,
                                    const std::vector<Vec>& samples,
                                    const std::vector<Vec>& input_samples) {
  if (sys.k >= sys.n) throw NotApplicable("verify_flow_tangency: k = n, no constraint");
  if (samples.empty()) throw EmptySampleSet("verify_flow_tangency: no samples");

  std::vector<Vec> inputs = input_samples;
  if (inputs.empty()) inputs.push_back(Vec::Zero(sys.p));

  TangencyReport rep;
  for (const Vec& x : samples) {
    const Mat drc = fd_jacobian(sys.r_c, x);
    for (const Vec& u : inputs) {
      const double res = (drc * sys.flow(x, u)).cwiseAbs().maxCoeff();
      if (res > rep.max_residual) {
        rep.max_residual = res;
        rep.worst_point = x;
      }
    }
  }
  rep.pass = rep.max_residual <= 1e-7;
  return rep;
}

AssumptionReport check_standing_assumptions(const HybridSystemDef& sys,
                                            const SamplerFn& flow_sampler,
                                            const SamplerFn& jump_sampler,
                                            const SamplerFn& input_sampler, Rng& rng,
                                            int n_samples) {
  AssumptionReport rep;
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = flow_sampler(rng);
    const Vec u = input_sampler ? input_sampler(rng) : Vec::Zero(sys.p);
    if (sys.k < sys.n) {
      rep.manifold_residual =
          std::max(rep.manifold_residual, sys.r_c(x).cwiseAbs().maxCoeff());
      const Mat drc = fd_jacobian(sys.r_c, x);
      Eigen::JacobiSVD<Mat> svd(drc);
      const auto& sv = svd.singularValues();
      rep.min_rank_margin =
          std::min(rep.min_rank_margin, sv(sv.size() - 1) / std::max(sv(0), 1e-300));
      rep.tangency_residual =
          std::max(rep.tangency_residual, (drc * sys.flow(x, u)).cwiseAbs().maxCoeff());
    }
  }
  for (int i = 0; i < n_samples; ++i) {
    const Vec x = jump_sampler(rng);
    rep.jump_guard_residual = std::max(rep.jump_guard_residual, std::abs(sys.r_d(x)));
    const Vec xg = sys.jump(x);
    rep.image_guard_residual =
        std::max(rep.image_guard_residual, std::abs(sys.r_g(xg)));
    if (!sys.in_flow_set(xg)) rep.image_in_flow_set = false;
    if (sys.in_jump_set(xg)) rep.jump_guard_disjoint = false;
  }
  rep.pass = rep.manifold_residual <= 1e-9 && rep.min_rank_margin > 1e-8 &&
             rep.tangency_residual <= 1e-7 && rep.jump_guard_residual <= 1e-9 &&
             rep.image_guard_residual <= 1e-9 && rep.image_in_flow_set &&
             rep.jump_guard_disjoint;
  return rep;
}

}  // namespace hyglue
