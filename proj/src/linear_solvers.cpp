#include "hodge5/linear_solvers.hpp"

#include <cmath>

namespace hodge5 {

CgResult conjugate_gradient(const LinearMap& apply, const Eigen::VectorXcd& rhs, const LinearMap& precondition,
                            const CgOptions& options, const std::string& what)
{
    CgResult out;
    out.x = Eigen::VectorXcd::Zero(rhs.size());
    const double bnorm = rhs.norm();
    if (bnorm <= options.absolute_floor || bnorm == 0.0) {
        return out;
    }
    Eigen::VectorXcd r = rhs;
    Eigen::VectorXcd z = precondition ? precondition(r) : r;
    Eigen::VectorXcd p = z;
    std::complex<double> rz = r.dot(z);
    double rel = 1.0;
    auto converged = [&](double rnorm) { return rnorm <= std::max(options.tolerance * bnorm, options.absolute_floor); };
    for (int it = 1; it <= options.max_iterations; ++it) {
        const Eigen::VectorXcd ap = apply(p);
        const std::complex<double> pap = p.dot(ap);
        if (pap.real() <= 0.0 || !std::isfinite(pap.real())) {
            // Direction in the null space: the residual cannot shrink further.
            break;
        }
        const std::complex<double> alpha = rz / pap;
        out.x += alpha * p;
        r -= alpha * ap;
        rel = r.norm() / bnorm;
        out.iterations = it;
        if (converged(r.norm())) {
            // Recompute the true residual to guard against drift.
            const double true_norm = (rhs - apply(out.x)).norm();
            rel = true_norm / bnorm;
            if (converged(true_norm)) {
                out.relative_residual = rel;
                return out;
            }
            r = rhs - apply(out.x);
        }
        z = precondition ? precondition(r) : r;
        const std::complex<double> rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    throw NumericalError(what + ": conjugate gradients did not converge in " + std::to_string(options.max_iterations) +
                             " iterations",
                         rel);
}

} // namespace hodge5
