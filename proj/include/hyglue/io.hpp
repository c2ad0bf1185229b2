#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "hyglue/analysis.hpp"
#include "hyglue/gluing.hpp"
#include "hyglue/hybrid_system.hpp"
#include "hyglue/observer.hpp"
#include "hyglue/tracking.hpp"

namespace hyglue {

using json = nlohmann::json;

/// Shortest round-trip decimal representation; identical bytes for
/// identical doubles.
std::string format_double(double v);

/// Columns: t, interval_index, x_1..x_n, event. The last sample of a
/// jumping arc is flagged `pre` and the first sample of the next arc
/// `post`; everything else is `flow`.
void write_execution_csv(const std::filesystem::path& path, const HybridExecution& exec);

/// Glued trajectories share the execution schema with interval_index 0.
void write_glued_csv(const std::filesystem::path& path, const Arc& traj);

/// Columns: t, zeta_hat_*, zeta_bar_*, x_hat_*, e_glued (projected columns
/// only when the run has been reconstructed).
void write_observer_csv(const std::filesystem::path& path, const ObserverRun& run);

/// Columns: t, x_*, r_*, zeta_*, zeta_r_*, u, u_r, glued_err.
void write_tracking_csv(const std::filesystem::path& path, const TrackingRun& run);

void write_dwell_csv(const std::filesystem::path& path, const DwellEstimate& est);

json to_json(const Vec& v);
json to_json(const AxiomCheck& chk);
json to_json(const GluingAxiomReport& rep);
json to_json(const ResidualReport& rep);
json to_json(const TransversalityReport& rep);
json to_json(const ErrorReport& rep);
json to_json(const LipschitzEstimate& est);
json to_json(const DwellEstimate& est);
json to_json(const AssumptionReport& rep);

void write_json(const std::filesystem::path& path, const json& j);

/// FNV-1a 64-bit content hash, hex encoded.
std::string fnv1a64_hex(const std::filesystem::path& path);

}  // namespace hyglue
