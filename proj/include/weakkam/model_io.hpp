#pragma once

#include "weakkam/lagrangian.hpp"

#include "json.hpp"

#include <filesystem>

namespace weakkam {

/// Model files are JSON:
///
///   {
///     "family": "mechanical-pendulum" | "riemannian-flat" | "mechanical-custom" | "mane-vectorfield",
///     "dim": 1,
///     "params": { ... family specific ... },
///     "audit": { "velocity_radius": 10, "superlinearity": [[1, 2], [2, 5]] }   (optional)
///   }
///
/// Family parameters:
///   riemannian-flat      metric (d x d rows, default identity)
///   mechanical-pendulum  amplitude (default 1), frequency (default 1)
///   mechanical-custom    metric, potential {constant, modes: [{k, cos, sin}]}
///   mane-vectorfield     field: one Fourier series per component
///
/// "custom" models carry code and can only be built through make_custom().
Model model_from_json(const nlohmann::json& j);

/// Parses and audits; throws ModelRejected when the audit fails.
Model load_model(const std::filesystem::path& path);
Model load_model_json(const nlohmann::json& j);

AuditOptions audit_options_from_json(const nlohmann::json& j);

}  // namespace weakkam
