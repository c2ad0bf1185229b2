#pragma once

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace hyglue {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Vector field with input: f(x, u). Systems without input receive an
/// empty u and must ignore it.
using FlowFn = std::function<Vec(const Vec&, const Vec&)>;
/// State reset map g(x).
using JumpFn = std::function<Vec(const Vec&)>;
/// Output map h(x).
using OutputFn = std::function<Vec(const Vec&)>;
/// Scalar guard level function.
using GuardFn = std::function<double(const Vec&)>;
/// Vector-valued constraint (manifold defining function).
using ConstraintFn = std::function<Vec(const Vec&)>;
/// Set membership predicate.
using MemberFn = std::function<bool(const Vec&)>;
/// Input signal u(t, x).
using InputFn = std::function<Vec(double, const Vec&)>;
/// Point sampler driven by a caller-owned RNG.
using SamplerFn = std::function<Vec(Rng&)>;

inline InputFn zero_input(int p = 0) {
  return [p](double, const Vec&) { return Vec::Zero(p).eval(); };
}

inline InputFn constant_input(const Vec& u) {
  return [u](double, const Vec&) { return u; };
}

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Simulation errors.
struct EscapedFlowSet : Error { using Error::Error; };
struct MaxJumpsExceeded : Error { using Error::Error; };
struct NonTransversalEvent : Error { using Error::Error; };
struct OutOfHorizon : Error { using Error::Error; };

// Checker / sampler errors.
struct EmptySampleSet : Error { using Error::Error; };
struct NotApplicable : Error { using Error::Error; };
struct SamplerEmpty : Error { using Error::Error; };
struct DegenerateSampler : Error { using Error::Error; };

// Gluing errors.
struct NoOutputMap : Error { using Error::Error; };
struct MatchingViolation : Error { using Error::Error; };
struct LeftGluedDomain : Error { using Error::Error; };
struct NoParameterization : Error { using Error::Error; };
struct NotInGluedDomain : Error { using Error::Error; };

// Observer errors.
struct OrderNonPositive : Error { using Error::Error; };
struct I1Violated : Error { using Error::Error; };
struct I2Violated : Error { using Error::Error; };
struct SignalTooSparse : Error { using Error::Error; };
struct CovarianceDivergence : Error { using Error::Error; };

// Tracking errors.
struct NotInputAffine : Error { using Error::Error; };
struct SingularGamma : Error { using Error::Error; };
struct NotHurwitz : Error { using Error::Error; };

// Model / CLI errors.
struct BadEnergyBand : Error { using Error::Error; };
struct ModelError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ModelNotFound : Error { using Error::Error; };
struct PipelineError : Error { using Error::Error; };

/// Forward finite-difference Jacobian of a vector map, column by column.
Mat fd_jacobian(const std::function<Vec(const Vec&)>& fn, const Vec& x, double step = 1e-6);

/// Forward finite-difference gradient of a scalar field.
Vec fd_gradient(const std::function<double(const Vec&)>& fn, const Vec& x, double step = 1e-6);

}  // namespace hyglue
