#include "hyglue/models.hpp"

#include <cmath>

namespace hyglue {

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

double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

void self_validate(const ExampleBundle& bundle) {
  Rng rng(0xB0B);
  const auto rep = check_standing_assumptions(bundle.sys, bundle.sampler.flow,
                                              bundle.sampler.jump,
                                              bundle.input_sampler, rng, 200);
  if (!rep.pass)
    throw ModelError(bundle.id + ": standing assumption check failed at construction");

  const auto axioms = check_gluing_axioms(bundle.sys, bundle.gm, bundle.sampler, rng,
                                          240, 2000);
  if (!axioms.pass)
    throw ModelError(bundle.id + ": gluing axiom check failed at construction");

  const auto d_pts = bundle.d_samples(rng, 60);
  if (bundle.sys.has_output() && !check_output_matching(bundle.sys, d_pts).pass)
    throw ModelError(bundle.id + ": output matching failed at construction");

  if (bundle.feedback && bundle.affine) {
    if (!check_relaxed_matching(bundle.sys, bundle.gm, *bundle.affine,
                                *bundle.feedback, d_pts)
             .pass)
      throw ModelError(bundle.id + ": relaxed matching failed at construction");
  } else {
    if (!check_vector_field_matching(bundle.sys, bundle.gm, d_pts).pass)
      throw ModelError(bundle.id + ": vector field matching failed at construction");
  }

  const auto trans = check_transversality(bundle.sys, Boundary::Jump, d_pts,
                                          bundle.u_samples(rng, 8));
  if (!trans.pass)
    throw ModelError(bundle.id + ": jump-set transversality failed at construction");
}

}  // namespace

std::vector<Vec> ExampleBundle::d_samples(Rng& rng, int count) const {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sampler.jump(rng));
  return out;
}

std::vector<Vec> ExampleBundle::c_samples(Rng& rng, int count) const {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sampler.flow(rng));
  return out;
}

std::vector<Vec> ExampleBundle::u_samples(Rng& rng, int count) const {
  std::vector<Vec> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(input_sampler ? input_sampler(rng) : Vec::Zero(sys.p));
  return out;
}

ExampleBundle bouncing_ball(double rho, double mass, double delta_lo, double delta_hi) {
  if (rho <= 0 || mass <= 0) throw ModelError("bouncing_ball: rho and mass must be positive");
  if (!(0 < delta_lo && delta_lo < delta_hi))
    throw BadEnergyBand("bouncing_ball: need 0 < delta_lo < delta_hi");

  ExampleBundle bundle;
  bundle.id = "bouncing_ball";
  bundle.params_doc =
      "rho>0 (gravity), mass>0, 0<delta_lo<delta_hi (energy band for E)";

  auto energy = [rho, mass](const Vec& x) {
    return mass * (rho * x(0) + 0.5 * x(1) * x(1));
  };

  HybridSystemDef sys;
  sys.n = 2;
  sys.k = 2;
  sys.p = 0;
  sys.q = 1;
  sys.flow = [rho](const Vec& x, const Vec&) { return v2(x(1), -rho); };
  sys.jump = [](const Vec& x) { return (-x).eval(); };
  sys.output = [](const Vec& x) { return Vec::Constant(1, x(0)); };
  sys.r_d = [](const Vec& x) { return -x(0); };
  sys.r_g = [](const Vec& x) { return x(0); };
  sys.in_flow_set = [](const Vec& x) { return x(0) >= -1e-9 && x.norm() > 1e-9; };
  sys.in_jump_set = [](const Vec& x) {
    return std::abs(x(0)) <= 1e-9 && x(1) < 0.0;
  };
  bundle.sys = sys;

  GluingMap gm;
  gm.n = 2;
  gm.m = 3;
  gm.psi = [rho](const Vec& x) {
    return v3(x(0) * x(0), 2.0 * x(0) * x(1), 2.0 * x(1) * x(1) + 4.0 * rho * x(0));
  };
  gm.d_psi_analytic = [rho](const Vec& x) {
    Mat j(3, 2);
    j << 2.0 * x(0), 0.0, 2.0 * x(1), 2.0 * x(0), 4.0 * rho, 4.0 * x(1);
    return j;
  };
  gm.psi_inv = [rho](const Vec& z) {
    const double x1 = std::sqrt(std::max(z(0), 0.0));
    const double w = std::max((z(2) - 4.0 * rho * x1) / 2.0, 0.0);
    const double sgn = z(1) >= 0.0 ? 1.0 : -1.0;
    return v2(x1, sgn * std::sqrt(w));
  };
  bundle.gm = gm;

  InvariantSetSpec inv;
  const double e_tol = 1e-7 * std::max(1.0, delta_hi);
  inv.member = [energy, delta_lo, delta_hi, e_tol](const Vec& x) {
    const double e = energy(x);
    return x(0) >= -1e-9 && e >= delta_lo - e_tol && e <= delta_hi + e_tol;
  };
  inv.chart.dim = 2;
  inv.chart.lo = v2(delta_lo, -1.0);
  inv.chart.hi = v2(delta_hi, 1.0);
  inv.chart.map = [rho, mass](const Vec& p) {
    const double eb = p(0) / mass;
    const double x2 = p(1) * std::sqrt(2.0 * eb);
    return v2(eb * (1.0 - p(1) * p(1)) / rho, x2);
  };
  bundle.inv_set = inv;

  bundle.sampler.flow = [rho, mass, delta_lo, delta_hi](Rng& rng) {
    // Energy band slightly wider than E; the apex strip |v| < 0.02 is
    // skipped (the inverse loses half the floating-point digits there).
    const double e = uniform(rng, 0.85 * delta_lo, 1.1 * delta_hi) / mass;
    double v = uniform(rng, 0.02, 0.999);
    if (uniform(rng, -1.0, 1.0) < 0.0) v = -v;
    return v2(e * (1.0 - v * v) / rho, v * std::sqrt(2.0 * e));
  };
  bundle.sampler.jump = [mass, delta_lo, delta_hi](Rng& rng) {
    const double e = uniform(rng, delta_lo, delta_hi) / mass;
    return v2(0.0, -std::sqrt(2.0 * e));
  };
  bundle.input_sampler = [](Rng&) { return Vec::Zero(0); };

  const double s_lo = std::sqrt(2.0 * delta_lo / mass);
  const double s_hi = std::sqrt(2.0 * delta_hi / mass);
  bundle.d_in_e.dim = 1;
  bundle.d_in_e.lo = Vec::Constant(1, s_lo);
  bundle.d_in_e.hi = Vec::Constant(1, s_hi);
  bundle.d_in_e.map = [](const Vec& p) { return v2(0.0, -p(0)); };
  bundle.g_in_e.dim = 1;
  bundle.g_in_e.lo = Vec::Constant(1, s_lo);
  bundle.g_in_e.hi = Vec::Constant(1, s_hi);
  bundle.g_in_e.map = [](const Vec& p) { return v2(0.0, p(0)); };

  GluedOverrides over;
  over.f_psi = [rho](const Vec& z) {
    return v3(z(1), z(2) - 6.0 * rho * std::sqrt(std::max(z(0), 0.0)), 0.0);
  };
  over.h_psi = [](const Vec& z) {
    return Vec::Constant(1, std::sqrt(std::max(z(0), 0.0)));
  };
  over.domain_test = [rho](const Vec& z) {
    const double scale = std::max(1.0, z.norm());
    if (z(0) < -1e-6 * scale || z.norm() < 1e-9) return false;
    const double x1 = std::sqrt(std::max(z(0), 0.0));
    const double w = z(2) - 4.0 * rho * x1;  // = 2 x2^2 on the image
    if (w < -1e-6 * scale) return false;
    const double surf = z(1) * z(1) - 2.0 * z(0) * w;
    return std::abs(surf) <= 1e-6 * std::max(1.0, scale * scale);
  };
  {
    Rng rng(0xB0B);
    bundle.glued =
        build_glued_system(bundle.sys, bundle.gm, inv, bundle.d_samples(rng, 40), over);
  }

  OutputInjectionConfig oi;
  oi.m = 3;
  oi.poles = {-2.0, -3.0, -4.0};
  oi.phi = [](double y) { return y * y; };
  oi.inj = [rho](double y_star) {
    return v3(0.0, -6.0 * rho * std::sqrt(std::max(y_star, 0.0)), 0.0);
  };
  bundle.oi_observer = oi;

  bundle.x0 = v2(2.0, -3.0);
  bundle.default_t_end = 16.0;

  self_validate(bundle);
  return bundle;
}

ExampleBundle ripple_model() {
  ExampleBundle bundle;
  bundle.id = "ripple";
  bundle.params_doc = "(no parameters)";

  const double rt3 = std::sqrt(3.0);
  const Vec h1 = v2(rt3, 1.0);
  const Vec h2 = v2(rt3, -1.0);
  // Boundary ray directions at -60 and +60 degrees; the halved form keeps
  // h1 . dir_d exactly zero in floating point.
  const Vec dir_d = 0.5 * v2(1.0, -rt3);
  const Vec dir_g = 0.5 * v2(1.0, rt3);

  HybridSystemDef sys;
  sys.n = 2;
  sys.k = 2;
  sys.p = 0;
  sys.q = 1;
  sys.flow = [](const Vec& x, const Vec&) { return v2(x(1), -x(0)); };
  sys.jump = [](const Vec& x) { return v2(x(0), -x(1)); };
  sys.output = [](const Vec& x) { return Vec::Constant(1, x(0)); };
  sys.r_d = [h1](const Vec& x) { return -h1.dot(x); };
  sys.r_g = [h2](const Vec& x) { return h2.dot(x); };
  sys.in_flow_set = [h1, h2](const Vec& x) {
    const double tol = 1e-7 * std::max(1.0, x.norm());
    return h1.dot(x) >= -tol && h2.dot(x) >= -tol && x.norm() > 1e-9;
  };
  sys.in_jump_set = [h1, h2](const Vec& x) {
    return std::abs(h1.dot(x)) <= 1e-6 * std::max(1.0, x.norm()) && h2.dot(x) > 0.0;
  };
  bundle.sys = sys;

  GluingMap gm;
  gm.n = 2;
  gm.m = 2;
  gm.psi = [](const Vec& x) {
    const double s = x.squaredNorm();
    return v2(4.0 * x(0) * x(0) * x(0) / s - 3.0 * x(0),
              -4.0 * x(1) * x(1) * x(1) / s + 3.0 * x(1));
  };
  gm.d_psi_analytic = [](const Vec& x) {
    const double s = x.squaredNorm();
    const double x1 = x(0), x2 = x(1);
    Mat j(2, 2);
    j(0, 0) = 12.0 * x1 * x1 / s - 8.0 * std::pow(x1, 4) / (s * s) - 3.0;
    j(0, 1) = -8.0 * std::pow(x1, 3) * x2 / (s * s);
    j(1, 0) = 8.0 * x1 * std::pow(x2, 3) / (s * s);
    j(1, 1) = -12.0 * x2 * x2 / s + 8.0 * std::pow(x2, 4) / (s * s) + 3.0;
    return j;
  };
  gm.psi_inv = [](const Vec& z) {
    // Seam points land within one ulp of the negative axis; snapping z2
    // to +0 there selects the +60 degree ray, i.e. the G-side preimage.
    double z2 = z(1);
    if (z(0) < 0.0 && std::abs(z2) <= 1e-12 * std::max(1.0, z.norm())) z2 = +0.0;
    const double theta = std::atan2(z2, z(0)) / 3.0;
    const double r = z.norm();
    return v2(r * std::cos(theta), r * std::sin(theta));
  };
  bundle.gm = gm;

  InvariantSetSpec inv;
  inv.member = [h1, h2](const Vec& x) {
    const double tol = 1e-7 * std::max(1.0, x.norm());
    return x.norm() >= 1.0 - 1e-7 && x.norm() <= 3.0 + 1e-7 && h1.dot(x) >= -tol &&
           h2.dot(x) >= -tol;
  };
  inv.chart.dim = 2;
  inv.chart.lo = v2(1.0, -M_PI / 3.0);
  inv.chart.hi = v2(3.0, M_PI / 3.0);
  inv.chart.map = [](const Vec& p) {
    return v2(p(0) * std::cos(p(1)), p(0) * std::sin(p(1)));
  };
  bundle.inv_set = inv;

  bundle.sampler.flow = [](Rng& rng) {
    const double r = uniform(rng, 0.9, 3.3);
    const double th = uniform(rng, -M_PI / 3.0 + 2e-3, M_PI / 3.0 - 2e-3);
    return v2(r * std::cos(th), r * std::sin(th));
  };
  bundle.sampler.jump = [dir_d](Rng& rng) {
    return (uniform(rng, 1.0, 3.0) * dir_d).eval();
  };
  bundle.input_sampler = [](Rng&) { return Vec::Zero(0); };

  bundle.d_in_e.dim = 1;
  bundle.d_in_e.lo = Vec::Constant(1, 1.0);
  bundle.d_in_e.hi = Vec::Constant(1, 3.0);
  bundle.d_in_e.map = [dir_d](const Vec& p) { return (p(0) * dir_d).eval(); };
  bundle.g_in_e.dim = 1;
  bundle.g_in_e.lo = Vec::Constant(1, 1.0);
  bundle.g_in_e.hi = Vec::Constant(1, 3.0);
  bundle.g_in_e.map = [dir_g](const Vec& p) { return (p(0) * dir_g).eval(); };

  GluedOverrides over;
  over.f_psi = [](const Vec& z) { return v2(3.0 * z(1), -3.0 * z(0)); };
  over.h_psi = [](const Vec& z) {
    const double phi = std::atan2(std::abs(z(1)), z(0));
    return Vec::Constant(1, z.norm() * std::cos(phi / 3.0));
  };
  over.domain_test = [](const Vec& z) { return z.norm() > 1e-9; };
  {
    Rng rng(0xB0B);
    bundle.glued =
        build_glued_system(bundle.sys, bundle.gm, inv, bundle.d_samples(rng, 40), over);
  }

  EkfConfig ekf;
  ekf.Q = 1e-6 * Mat::Identity(2, 2);
  ekf.R = Mat::Constant(1, 1, 1e-4);
  ekf.zeta_hat0 = v2(1.5, 0.5);
  bundle.ekf_observer = ekf;

  bundle.x0 = v2(2.0, 0.0);
  bundle.default_t_end = 10.0;

  self_validate(bundle);
  return bundle;
}

ExampleBundle reflected_double_integrator(double a11, double a12, double a21,
                                          double a22, double b, double k1, double k2) {
  if (a12 <= 0) throw ModelError("reflected_double_integrator: a12 must be positive");
  if (b == 0) throw ModelError("reflected_double_integrator: b must be nonzero");

  ExampleBundle bundle;
  bundle.id = "reflected_di";
  bundle.params_doc = "a11, a12>0, a21, a22, b!=0, k1, k2 (A+BK must be Hurwitz)";

  Mat A(2, 2);
  A << a11, a12, a21, a22;
  Mat B(2, 1);
  B << 0.0, b;
  Mat K(1, 2);
  K << k1, k2;
  {
    Eigen::EigenSolver<Mat> eig((A + B * K).eval());
    if (eig.eigenvalues().real().maxCoeff() > -1e-6)
      throw NotHurwitz("reflected_double_integrator: A + B K is not Hurwitz");
  }

  HybridSystemDef sys;
  sys.n = 3;
  sys.k = 2;
  sys.p = 1;
  sys.q = 0;
  sys.flow = [a11, a12, a21, a22, b](const Vec& x, const Vec& u) {
    return v3(a11 * x(0) + a12 * x(1), a21 * x(0) + a22 * x(1) + b * u(0), 0.0);
  };
  sys.jump = [](const Vec& x) { return (-x).eval(); };
  sys.r_c = [](const Vec& x) { return Vec::Constant(1, x(2) * x(2) - 1.0); };
  sys.r_d = [](const Vec& x) { return -x(0); };
  sys.r_g = [](const Vec& x) { return x(0); };
  sys.in_flow_set = [](const Vec& x) {
    return x(0) >= -1e-9 && std::hypot(x(0), x(1)) > 1e-9 &&
           std::abs(x(2) * x(2) - 1.0) <= 1e-6;
  };
  sys.in_jump_set = [](const Vec& x) {
    return std::abs(x(0)) <= 1e-9 && x(1) < 0.0 && std::abs(x(2) * x(2) - 1.0) <= 1e-6;
  };
  bundle.sys = sys;

  GluingMap gm;
  gm.n = 3;
  gm.m = 2;
  gm.psi = [](const Vec& x) { return v2(x(2) * x(0), x(2) * x(1)); };
  gm.d_psi_analytic = [](const Vec& x) {
    Mat j(2, 3);
    j << x(2), 0.0, x(0), 0.0, x(2), x(1);
    return j;
  };
  gm.psi_inv = [](const Vec& z) {
    double sgn;
    if (z(0) != 0.0)
      sgn = z(0) > 0.0 ? 1.0 : -1.0;
    else if (z(1) != 0.0)
      sgn = z(1) > 0.0 ? 1.0 : -1.0;
    else
      throw NotInGluedDomain("reflected_di: psi_inv undefined at the origin");
    return v3(sgn * z(0), sgn * z(1), sgn);
  };
  bundle.gm = gm;

  InvariantSetSpec inv;
  inv.member = [](const Vec& x) {
    const double r = std::hypot(x(0), x(1));
    return x(0) >= -1e-9 && r >= 0.4 - 1e-7 && r <= 13.0 + 1e-7 &&
           std::abs(x(2) * x(2) - 1.0) <= 1e-6;
  };
  inv.chart.dim = 3;
  inv.chart.lo = v3(0.4, -M_PI / 2.0, -1.0);
  inv.chart.hi = v3(13.0, M_PI / 2.0, 1.0);
  inv.chart.map = [](const Vec& p) {
    return v3(p(0) * std::cos(p(1)), p(0) * std::sin(p(1)), p(2) >= 0.0 ? 1.0 : -1.0);
  };
  bundle.inv_set = inv;

  bundle.sampler.flow = [](Rng& rng) {
    const double r = uniform(rng, 0.5, 12.0);
    const double phi = uniform(rng, -0.999 * M_PI / 2.0, 0.999 * M_PI / 2.0);
    const double p = uniform(rng, -1.0, 1.0) >= 0.0 ? 1.0 : -1.0;
    return v3(r * std::cos(phi), r * std::sin(phi), p);
  };
  bundle.sampler.jump = [](Rng& rng) {
    const double v = uniform(rng, 0.5, 12.0);
    const double p = uniform(rng, -1.0, 1.0) >= 0.0 ? 1.0 : -1.0;
    return v3(0.0, -v, p);
  };
  bundle.input_sampler = [](Rng& rng) {
    return Vec::Constant(1, uniform(rng, -5.0, 5.0));
  };

  bundle.d_in_e.dim = 2;
  bundle.d_in_e.lo = v2(0.4, -1.0);
  bundle.d_in_e.hi = v2(13.0, 1.0);
  bundle.d_in_e.map = [](const Vec& p) {
    return v3(0.0, -p(0), p(1) >= 0.0 ? 1.0 : -1.0);
  };
  bundle.g_in_e.dim = 2;
  bundle.g_in_e.lo = v2(0.4, -1.0);
  bundle.g_in_e.hi = v2(13.0, 1.0);
  bundle.g_in_e.map = [](const Vec& p) {
    return v3(0.0, p(0), p(1) >= 0.0 ? 1.0 : -1.0);
  };

  InputAffine aff;
  aff.a = [a11, a12, a21, a22](const Vec& x) {
    return v3(a11 * x(0) + a12 * x(1), a21 * x(0) + a22 * x(1), 0.0);
  };
  aff.b = [b](const Vec&) {
    Mat m(3, 1);
    m << 0.0, b, 0.0;
    return m;
  };
  bundle.affine = aff;

  MatchingFeedback fb;
  fb.gamma = [](const Vec& x) { return Mat::Constant(1, 1, x(2)); };
  fb.kappa = [](const Vec&) { return Vec::Zero(1); };
  bundle.feedback = fb;

  GluedOverrides over;
  over.f_psi = [A](const Vec& z) { return (A * z).eval(); };
  over.domain_test = [](const Vec& z) { return z.norm() > 1e-9; };
  {
    Rng rng(0xB0B);
    bundle.glued =
        build_glued_system(bundle.sys, bundle.gm, inv, bundle.d_samples(rng, 40), over);
  }

  TrackingConfig tc;
  tc.K = K;
  tc.r0 = v3(0.0, 6.0, 1.0);
  tc.u_r = [](double t, const Vec&) {
    return Vec::Constant(1, std::fmod(t, 10.0) < 4.0 ? -3.0 : -2.0);
  };
  tc.u_r_breakpoints = [](double t_end) {
    std::vector<double> breaks;
    for (double base = 0.0; base < t_end; base += 10.0) {
      if (base > 0.0) breaks.push_back(base);
      if (base + 4.0 < t_end) breaks.push_back(base + 4.0);
    }
    return breaks;
  };
  tc.A = A;
  tc.B = B;
  tc.t_end = 20.0;
  bundle.tracking = tc;

  bundle.x0 = v3(3.0, 8.0, 1.0);
  bundle.default_t_end = 20.0;

  self_validate(bundle);
  return bundle;
}

}  // namespace hyglue
