#pragma once

// X W + W X = V for 5x5 antisymmetric W, V, and the pointwise construction
// of a symmetric t with v = t g^{-1} w + w g^{-1} t.

#include "hodge5/errors.hpp"
#include "hodge5/exterior_algebra.hpp"
#include "hodge5/fields.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <string>
#include <vector>

namespace hodge5 {

template <typename Scalar>
using Matrix5 = Eigen::Matrix<Scalar, 5, 5>;

template <typename Scalar>
using SylvesterMatrix = Eigen::Matrix<Scalar, 25, 25>;

/// X -> X W + W X.
template <typename Scalar>
Matrix5<Scalar> apply_sylvester(const Matrix5<Scalar>& w, const Matrix5<Scalar>& x)
{
    return x * w + w * x;
}

/// Matrix of X -> X W + W X on column-major vec(X): W^T (x) I + I (x) W.
template <typename Scalar>
SylvesterMatrix<Scalar> sylvester_operator(const Matrix5<Scalar>& w)
{
    SylvesterMatrix<Scalar> l = SylvesterMatrix<Scalar>::Zero();
    for (int a = 0; a < 5; ++a) {
        for (int b = 0; b < 5; ++b) {
            // (W^T (x) I): block (a,b) = W(b,a) I
            l.template block<5, 5>(5 * a, 5 * b).diagonal().array() += w(b, a);
        }
        l.template block<5, 5>(5 * a, 5 * a) += w;
    }
    return l;
}

template <typename Scalar>
double antisymmetry_defect(const Matrix5<Scalar>& a)
{
    return (a + a.transpose()).cwiseAbs().maxCoeff();
}

template <typename Scalar>
void require_antisymmetric(const Matrix5<Scalar>& a, const char* what)
{
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if (!a.allFinite() || antisymmetry_defect(a) > 1e-12 * scale) {
        throw ArgumentError(std::string(what) + " is not antisymmetric");
    }
}

template <typename Scalar>
struct SylvesterSolution {
    Matrix5<Scalar> x;  ///< minimum-norm least-squares solution
    Matrix5<Scalar> t;  ///< (x + x^T) / 2
    double residual = 0.0;            ///< |L(x) - V|_F
    double symmetric_residual = 0.0;  ///< |L(t) - V|_F
};

/// Minimum-norm solve with singular values below 1e-10 sigma_max discarded.
/// InvariantViolation if |L(t) - V| exceeds 1e-9 |V|.
template <typename Scalar>
SylvesterSolution<Scalar> solve_sylvester(const Matrix5<Scalar>& w, const Matrix5<Scalar>& v)
{
    require_antisymmetric(w, "W");
    require_antisymmetric(v, "V");
    Eigen::JacobiSVD<SylvesterMatrix<Scalar>> svd(sylvester_operator(w), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = 1e-10 * s(0);
    Eigen::Matrix<Scalar, 25, 1> rhs = Eigen::Map<const Eigen::Matrix<Scalar, 25, 1>>(v.data());
    Eigen::Matrix<Scalar, 25, 1> coeff = svd.matrixU().adjoint() * rhs;
    for (int i = 0; i < 25; ++i) {
        coeff(i) = (s(i) > cut && s(i) > 0.0) ? coeff(i) / s(i) : Scalar(0);
    }
    const Eigen::Matrix<Scalar, 25, 1> xv = svd.matrixV() * coeff;
    SylvesterSolution<Scalar> out;
    out.x = Eigen::Map<const Matrix5<Scalar>>(xv.data());
    out.t = Scalar(0.5) * (out.x + out.x.transpose());
    out.residual = (apply_sylvester(w, out.x) - v).norm();
    out.symmetric_residual = (apply_sylvester(w, out.t) - v).norm();
    if (out.symmetric_residual > 1e-9 * v.norm()) {
        throw InvariantViolation("Sylvester residual " + std::to_string(out.symmetric_residual) +
                                 " exceeds 1e-9 |V|; V is not orthogonal to the kernel");
    }
    return out;
}

/// Orthonormal basis of ker L_W (rank cut 1e-10 sigma_max). For W != 0 every
/// element is checked symmetric to 1e-8 (InvariantViolation otherwise).
template <typename Scalar>
std::vector<Matrix5<Scalar>> kernel_basis(const Matrix5<Scalar>& w)
{
    require_antisymmetric(w, "W");
    Eigen::JacobiSVD<SylvesterMatrix<Scalar>> svd(sylvester_operator(w), Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = 1e-10 * s(0);
    std::vector<Matrix5<Scalar>> basis;
    for (int i = 0; i < 25; ++i) {
        if (s(i) <= cut || s(i) == 0.0) {
            const Eigen::Matrix<Scalar, 25, 1> col = svd.matrixV().col(i);
            basis.push_back(Eigen::Map<const Matrix5<Scalar>>(col.data()));
        }
    }
    if (!w.isZero(0.0)) {
        for (const auto& e : basis) {
            const double asym = (e - e.transpose()).norm();
            if (asym > 1e-8) {
                throw InvariantViolation("kernel element of L_W is not symmetric (defect " + std::to_string(asym) + ")");
            }
        }
    }
    return basis;
}

/// Largest |<E, V>_F| = |sum conj(e_ij) v_ij| over the kernel basis.
template <typename Scalar>
double orthogonality_check(const Matrix5<Scalar>& w, const Matrix5<Scalar>& v)
{
    require_antisymmetric(v, "V");
    double worst = 0.0;
    for (const auto& e : kernel_basis(w)) {
        worst = std::max(worst, std::abs((e.conjugate().cwiseProduct(v)).sum()));
    }
    return worst;
}

struct DensityResult {
    SymTensorField t;
    int grid_radius = 0;
    int masked_points = 0;
    double residual = 0.0;  ///< max pointwise |t g^{-1} w + w g^{-1} t - v|_max
    double v_max = 0.0;     ///< max pointwise |v|_max
};

/// 2-form values at the grid points, 10 per point (point-major).
struct GridTwoForm {
    int grid_radius = 0;
    Eigen::VectorXcd values;
};

/// Pointwise solve of v = t g^{-1} w + w g^{-1} t on the masked grid points
/// via W~ = G^{-1/2} W G^{-1/2}, V~ likewise, T = G^{1/2} T~ G^{1/2}; t is 0
/// off the mask. An empty mask selects every point.
/// ContractError if |W| < 1e-8 max |W| at a masked point or v does not vanish
/// off the mask; InvariantViolation if the residual exceeds 1e-8 |v|_inf.
DensityResult density_construct(const MetricField& g, const GridTwoForm& w, const GridTwoForm& v,
                                const std::vector<char>& mask = {});

/// Same on Fourier fields, sampled on the metric grid (or the grid of radius
/// `grid_radius` for a constant metric; -1 picks the lattice radius).
DensityResult density_construct(const MetricField& g, const FormField& w, const FormField& v,
                                const std::vector<char>& mask = {}, int grid_radius = -1);

/// Samples a Fourier 2-form at the points of the grid of radius `grid_radius`.
GridTwoForm sample_two_form(const FormField& u, int grid_radius);

} // namespace hodge5
