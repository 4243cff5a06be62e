#pragma once

// Coefficient-level discretization of forms on the 5-torus. Vectors are
// mode-major (see FormField). For a sampled metric every operator is the
// Galerkin compression in the g-weighted L2 pairing:
//   M_k = P W_k P          (k <= 2, quadrature on the metric grid)
//   M_k = E_k^T M_{5-k}^{-1} E_k   (k >= 3, discrete duality)
//   star_k = E_k M_k (k <= 2),  star_k = M_{5-k}^{-1} E_k (k >= 3)
//   delta_k = M_{k-1}^{-1} D_{k-1}^H M_k
// so that star star = id and delta = sign * (star d star) hold exactly.
// For a constant metric the same formulas reduce to exact per-mode blocks.

#include "hodge5/exterior_algebra.hpp"
#include "hodge5/fields.hpp"
#include "hodge5/grid.hpp"
#include "hodge5/lattice.hpp"
#include "hodge5/linear_solvers.hpp"

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace hodge5 {

struct GalerkinOptions {
    /// Largest coefficient dimension for which dense mass factorizations are cached.
    int dense_threshold = 4000;
    CgOptions mass_cg{1e-13, 5000};
};

class TorusGalerkin {
public:
    /// ConfigurationError if a sampled metric grid cannot resolve the lattice.
    TorusGalerkin(MetricField g, int radius, GalerkinOptions options = {});

    static std::shared_ptr<const TorusGalerkin> create(MetricField g, int radius, GalerkinOptions options = {})
    {
        return std::make_shared<const TorusGalerkin>(std::move(g), radius, options);
    }

    TorusGalerkin(const TorusGalerkin&) = delete;
    TorusGalerkin& operator=(const TorusGalerkin&) = delete;

    const ModeLattice& lattice() const { return m_lattice; }
    const MetricField& metric() const { return m_metric; }
    const GalerkinOptions& options() const { return m_options; }
    bool constant_metric() const { return m_metric.is_constant(); }
    int dimension(int k) const { return m_lattice.size() * form_dimension(k); }
    /// Collocation grid of a sampled metric.
    const CollocationGrid& grid() const;

    /// Real matrix of u -> q ^ u at lattice mode `mode` (d is i times this).
    const Eigen::MatrixXd& wedge_block(int k, int mode) const;

    /// Per-mode orthonormal basis of the exact subfiber of 2-forms (range of
    /// q ^ on 1-forms, 4 columns) and of its flat complement (6 columns).
    /// At the zero mode the exact basis is empty and the complement is the
    /// identity (all harmonic); callers check mode_is_zero.
    const Eigen::MatrixXd& exact_frame(int mode) const;
    const Eigen::MatrixXd& complement_frame(int mode) const;
    bool mode_is_zero(int mode) const { return mode == m_lattice.zero_index(); }

    Eigen::VectorXcd d(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd d_adjoint(int k, const Eigen::VectorXcd& v) const;
    Eigen::VectorXcd duality(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd duality_transpose(int k, const Eigen::VectorXcd& v) const;

    Eigen::VectorXcd mass(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd mass_solve(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd star(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd codifferential(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd laplacian(int k, const Eigen::VectorXcd& u) const;
    /// B = star_3 d on 2-forms.
    Eigen::VectorXcd beltrami(const Eigen::VectorXcd& u) const;

    /// (2 pi)^5 v^H M_k u.
    cdouble inner(int k, const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) const;

    /// Fiber mass of a constant metric.
    const Eigen::MatrixXd& constant_fiber_mass(int k) const;

    /// Dense M_k (k <= 2) of a sampled metric; throws ConfigurationError above
    /// the dense threshold.
    const Eigen::MatrixXcd& dense_mass(int k) const;

    /// Values of a coefficient vector at the metric grid points (sampled only).
    Eigen::VectorXcd to_grid(int components, const Eigen::VectorXcd& coeffs) const;
    /// Lattice coefficients of grid values (sampled only).
    Eigen::VectorXcd from_grid(int components, const Eigen::VectorXcd& values) const;

    /// Pointwise fiber mass |g|^{1/2} C_k(g^{-1}) at each grid point, k <= 2.
    const std::vector<Eigen::MatrixXd>& grid_fiber_mass(int k) const;

private:
    Eigen::VectorXcd per_mode(const Eigen::VectorXcd& u, int in_dim, int out_dim,
                              const std::function<void(int, const Eigen::VectorXcd&, Eigen::Ref<Eigen::VectorXcd>)>& f) const;
    Eigen::VectorXcd sampled_mass(int k, const Eigen::VectorXcd& u) const;
    Eigen::VectorXcd sampled_mass_solve(int k, const Eigen::VectorXcd& u) const;
    const Eigen::LLT<Eigen::MatrixXcd>& dense_factor(int k) const;

    MetricField m_metric;
    ModeLattice m_lattice;
    GalerkinOptions m_options;
    std::optional<CollocationGrid> m_grid;

    std::array<std::vector<Eigen::MatrixXd>, 5> m_wedge;
    std::vector<Eigen::MatrixXd> m_exact;
    std::vector<Eigen::MatrixXd> m_complement;

    std::array<Eigen::MatrixXd, 6> m_const_mass;
    std::array<Eigen::MatrixXd, 6> m_const_mass_inverse;

    std::array<std::vector<Eigen::MatrixXd>, 3> m_grid_mass;
    std::array<Eigen::MatrixXcd, 3> m_mean_mass_inverse;

    mutable std::array<std::once_flag, 3> m_dense_once;
    mutable std::array<Eigen::MatrixXcd, 3> m_dense_mass;
    mutable std::array<std::once_flag, 3> m_factor_once;
    mutable std::array<std::unique_ptr<Eigen::LLT<Eigen::MatrixXcd>>, 3> m_factor;
};

} // namespace hodge5
