#pragma once

#include "drcs/conic.hpp"

namespace drcs::conic::detail {

/// solve_relaxation with the variable bounds of `prog` replaced by `lower` / `upper`.
/// Lets branch-and-bound fix binaries without copying the constraint data.
SolveResult solve_with_bounds(const ConeProgram& prog, const VectorXd& lower, const VectorXd& upper,
                              const SolverOptions& opts);

}  // namespace drcs::conic::detail
