#pragma once

// First-order metric variation of the Beltrami operator B = *_g d on
// 2-forms. Everything here uses the Galerkin discretization of
// torus_galerkin.hpp, so that on eigenfields
//   d/de B_{g+eh} u = i lambda M^{-1} P (W S(h) u)
// holds exactly for the discrete operator, not just in the continuum limit.

#include "hodge5/eigensolver.hpp"
#include "hodge5/fields.hpp"
#include "hodge5/torus_operators.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <vector>

namespace hodge5 {

/// S(h, .) on one 2-form fiber as a 10x10 matrix:
///   S(h,w) = -1/2 tr_g(h) W + h g^{-1} W + W g^{-1} h   (W the matrix of w).
Eigen::MatrixXcd s_form_matrix(const MetricTensor& g, const SymTensor& h);
FormFiber s_form(const MetricTensor& g, const SymTensor& h, const FormFiber& w);

/// Two-term form T g^{-1} W + W g^{-1} T, equal to S(h_T, w) for h_T = T - tr_g(T) g.
FormFiber traceless_s_form(const MetricTensor& g, const SymTensor& t, const FormFiber& w);

/// Galerkin projection of the pointwise S(h, w). Constant g and h act per
/// mode; otherwise the product is formed on the grid shared by g and h.
FormField s_form(const Galerkin& g, const Direction& h, const FormField& w);
FormField s_form(const MetricField& g, const Direction& h, const FormField& w);

/// <S(h,u), v>_g without the mass solve.
cdouble s_pairing(const Galerkin& g, const Direction& h, const FormField& u, const FormField& v);

/// Derivative of B at g in direction h applied to an eigenfield u (B u = i lambda u).
/// ContractError if the relative eigen-residual exceeds 1e-8.
FormField d_beltrami(const Galerkin& g, const Direction& h, const FormField& u, double lambda);
FormField d_beltrami(const MetricField& g, const Direction& h, const FormField& u, double lambda);

/// h_T = T - tr_g(T) g pointwise.
Direction traceless_shift(const MetricField& g, const Direction& t);

/// Pointwise tr_g h (one value for constant data, grid values otherwise).
std::vector<cdouble> metric_trace(const MetricField& g, const Direction& h);

struct MetricDerivativeReport {
    double eps = 0.0;
    Matrix5d inverse_fd;     ///< central difference of g^{-1}
    Matrix5d inverse_exact;  ///< -g^{-1} h g^{-1}
    double inverse_error = 0.0;
    double sqrt_det_fd = 0.0;
    double sqrt_det_exact = 0.0;  ///< 1/2 |g|^{1/2} tr_g h
    double sqrt_det_error = 0.0;
    double det_log_derivative = 0.0;  ///< D(|g|)(h) / |g| by central differences
};

/// Errors are relative, or absolute when the closed form vanishes.
/// MetricError if g +- eps h is not SPD.
MetricDerivativeReport metric_derivative_identities(const MetricTensor& g, const SymTensor& h, double eps = 1e-5);

/// Co-exact Beltrami eigenspace at lambda with its distance to the rest of
/// the computed spectrum.
struct Eigenspace {
    double lambda = 0.0;
    std::vector<FormField> basis;
    double gap = 0.0;
};

/// Eigenvalues within tol * max(1, |lambda|) of lambda. The spectrum options
/// select how much of the spectrum is computed (count 0 means all).
/// ContractError if nothing lies within the tolerance.
Eigenspace beltrami_eigenspace(const Galerkin& g, double lambda, const SpectrumOptions& options = {}, double tol = 1e-7);

struct SplittingPrediction {
    double lambda = 0.0;
    int m = 0;
    Eigen::MatrixXcd matrix;       ///< M_jk = lambda <S(h,u_j), u_k>_g
    double hermitian_defect = 0.0;  ///< |M - M^H| / |M|
    Eigen::VectorXd slopes;         ///< ascending eigenvalues of (M + M^H)/2
    Eigen::MatrixXcd rotation;      ///< eigenvectors, columns matched to slopes
    std::vector<FormField> adapted_basis;

    double spread() const;
};

/// ContractError if the basis is not g-orthonormal to 1e-9 or an element is
/// not an eigenfield at lambda; InvariantViolation if M fails Hermitian symmetry.
SplittingPrediction predict_splitting(const Galerkin& g, const Direction& h, double lambda,
                                      const std::vector<FormField>& basis);

struct BranchOptions {
    std::vector<double> eps_grid{-1e-2, -5e-3, -2.5e-3, 2.5e-3, 5e-3, 1e-2};
    int degree = 3;
    /// Half-width of the capture window is gap/2; 0 uses the computed gap.
    double gap = 0.0;
    SpectrumOptions spectrum;
    double multiplicity_tolerance = 1e-7;
};

struct BranchTrace {
    double lambda = 0.0;
    int m = 0;
    double window = 0.0;
    std::vector<double> eps;
    /// branches[i][j]: value of branch j at eps[i]; branch j has the j-th
    /// smallest slope.
    std::vector<std::vector<double>> branches;
    Eigen::VectorXd slopes;
};

/// Diagonalizes B at g + eps h for every eps and follows the m eigenvalues
/// in the window lambda +- gap/2. Within a window the values are matched to
/// branches monotonically (ascending for eps > 0, descending for eps < 0),
/// the nearest-value assignment for analytic branches that only meet at 0.
/// GapTooSmallError if some window captures a count other than m; MetricError
/// if g + eps h is not SPD.
BranchTrace trace_branches(const Galerkin& g, const Direction& h, double lambda, const BranchOptions& options = {});

/// Least-squares exponent p in max_j |l_j(eps) - lambda - eps s_j| ~ C |eps|^p.
double residual_order(const BranchTrace& trace, const Eigen::VectorXd& slopes);

enum class DirectionFamily { constant_plus_low_frequency, constant, conformal_constant };

struct SplittingSearch {
    std::optional<Direction> direction;
    std::optional<SplittingPrediction> prediction;
    std::vector<double> spreads;
    int attempts = 0;

    bool found() const { return direction.has_value(); }
};

/// Random real directions from `family`, stopping at the first whose
/// predicted slopes spread by more than 1e-6 |lambda|. ContractError if m < 2.
SplittingSearch find_splitting_direction(const Galerkin& g, double lambda, const std::vector<FormField>& basis, int attempts,
                                         std::uint64_t seed,
                                         DirectionFamily family = DirectionFamily::constant_plus_low_frequency);

/// Random constant symmetric direction with Gaussian entries scaled by `scale`.
SymTensor random_sym_tensor(std::mt19937_64& rng, double scale = 1.0);

struct PerturbationReport {
    double lambda = 0.0;
    int m = 0;
    std::vector<double> predicted_slopes;
    std::vector<double> measured_slopes;
    double max_deviation = 0.0;
    double residual_order = 0.0;
    std::vector<double> eps_grid;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

PerturbationReport compare_splitting(const SplittingPrediction& prediction, const BranchTrace& trace, std::uint64_t seed);

} // namespace hodge5
