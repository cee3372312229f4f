#pragma once

#include "rsense/bounds.hpp"
#include "rsense/core_model.hpp"
#include "rsense/optimizer.hpp"

namespace rsense {

struct InstanceBounds {
  BoundInputs inputs;
  ReportParams params;
};

/// Fills bound inputs from a solved instance: delta from estimate_rip, eps
/// = ||w||, constants of the kernel loss at the solution, lambda_min from
/// the kernel Hessian at M*, and the large-delta inputs with a random unit
/// direction U for Q = X U^T + U X^T.
InstanceBounds bound_inputs_from_instance(const ProblemInstance& instance, const SolveResult& solved, double h,
                                          double lambda_mix, int samples, Seed seed);

}  // namespace rsense
