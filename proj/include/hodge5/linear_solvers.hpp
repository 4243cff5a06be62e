#pragma once

#include "hodge5/errors.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace hodge5 {

using LinearMap = std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)>;

struct CgOptions {
    double tolerance = 1e-10;
    int max_iterations = 2000;
    // Residual norm that counts as converged regardless of |rhs|; lets a
    // caller measure accuracy against its own input scale.
    double absolute_floor = 0.0;
};

struct CgResult {
    Eigen::VectorXcd x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned conjugate gradients for a Hermitian positive semidefinite
/// map with a consistent right-hand side. `precondition` may be empty.
/// Throws NumericalError (carrying the achieved relative residual) when the
/// tolerance is not reached.
CgResult conjugate_gradient(const LinearMap& apply, const Eigen::VectorXcd& rhs, const LinearMap& precondition,
                            const CgOptions& options, const std::string& what);

} // namespace hodge5
