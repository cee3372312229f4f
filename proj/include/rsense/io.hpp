#pragma once

#include <string>

#include "json.hpp"
#include "rsense/bounds.hpp"
#include "rsense/core_model.hpp"
#include "rsense/empirics.hpp"
#include "rsense/optimizer.hpp"
#include "rsense/sweep.hpp"

namespace rsense {

using Json = nlohmann::ordered_json;

/// {n, r, m, seed, spectrum, noise: {kind, params, centered}[, noise_norm]}.
/// Matrices are not stored; make_instance regenerates them from the seed.
Json instance_to_json(const InstanceSpec& spec);
InstanceSpec instance_from_json(const Json& doc);

/// Flat document with keys zeta1, zeta2, rho, lambda1, lambda2, g_min,
/// b_max, l1, l2, samples, seed.
Json constants_to_json(const ConstantEstimates& c);
ConstantEstimates constants_from_json(const Json& doc);

/// Inputs echoed under "inputs", one key per calculator under "bounds"
/// (null when rejected) and the rejection messages under "errors".
Json bound_report_to_json(const BoundReport& report);

/// Reads BoundInputs fields by name; missing keys keep their defaults.
BoundInputs bound_inputs_from_json(const Json& doc);

/// Snake-case keys mirroring SweepConfig fields. Keys absent from `doc`
/// keep the value in `base`; unknown keys are rejected.
SweepConfig sweep_config_from_json(const Json& doc, SweepConfig base = {});
Json sweep_config_to_json(const SweepConfig& config);
Json sweep_rows_to_json(const std::vector<SweepRow>& rows);

Json solve_summary_to_json(const SolveResult& result, const ProblemInstance& instance, const LossSpec& spec);

std::string dump(const Json& doc);
Json read_json_file(const std::string& path);
/// Throws InvalidArgument when the file cannot be written.
void write_text_file(const std::string& path, const std::string& text);

}  // namespace rsense
