#pragma once

#include "hodge5/fields.hpp"
#include "hodge5/torus_galerkin.hpp"

#include <functional>
#include <memory>
#include <random>
#include <string>

namespace hodge5 {

using Galerkin = std::shared_ptr<const TorusGalerkin>;

/// Symmetry of an operator with respect to the g-weighted L2 pairing.
/// skew and hermitian_after_i both mean <Au,v> = -<u,Av>.
enum class SymmetryClass { symmetric, skew, hermitian_after_i, none };
enum class DomainRestriction { full, coexact, exact_harmonic };
enum class OperatorKind { generic, exterior_d, hodge_star, codifferential, beltrami, laplacian, projector, gauge };

std::string to_string(SymmetryClass c);
std::string to_string(DomainRestriction d);

/// Immutable linear map on FormFields plus the metadata the eigensolver and
/// the symmetry tests rely on.
struct OperatorHandle {
    std::string name;
    int domain_rank = 2;
    int range_rank = 2;
    SymmetryClass symmetry = SymmetryClass::none;
    DomainRestriction domain = DomainRestriction::full;
    OperatorKind kind = OperatorKind::generic;
    Galerkin galerkin;
    std::function<FormField(const FormField&)> map;

    FormField operator()(const FormField& u) const;
};

/// Per mode (du)(q) = i q ^ u(q); metric independent and exact.
FormField exterior_d(const FormField& u);

FormField hodge_star_field(const TorusGalerkin& g, const FormField& u);
FormField codifferential(const TorusGalerkin& g, const FormField& u);

OperatorHandle beltrami(const Galerkin& g);
OperatorHandle hodge_laplacian(const Galerkin& g, int k);
OperatorHandle identity_operator(const Galerkin& g, int k);

/// Co-exact restriction of omega -> *_g(i q ^ omega) for a constant metric.
struct BeltramiFiber {
    Eigen::MatrixXd a;      ///< 6x6 real symmetric, B_q = i a on the subfiber
    Eigen::MatrixXd basis;  ///< 10x6, orthonormal in the fiber mass of g
};

/// Throws DegenerateError for q = 0.
BeltramiFiber beltrami_fiber(const MetricTensor& g, const Mode& q);

struct HodgeProjectors {
    OperatorHandle harmonic;
    OperatorHandle exact;
    OperatorHandle coexact;
};

/// g-orthogonal projectors onto harmonic, exact and co-exact k-forms.
/// Constant metrics use exact per-mode formulas; sampled metrics solve the
/// restricted Laplacian systems by conjugate gradients (NumericalError on
/// failure).
HodgeProjectors hodge_projectors(const Galerkin& g, int k = 2, double tolerance = 1e-12);

/// Pointwise multiplier (det g / det g_eps)^{1/4} on the grid shared by the
/// two metrics; a single value when both are constant.
std::vector<double> gauge_multiplier(const MetricField& g, const MetricField& g_eps);

/// Galerkin compression of multiplication by gauge_multiplier(g, g_eps).
OperatorHandle gauge_unitary(const Galerkin& g, const MetricField& g_eps, int k = 2);

/// (2 pi)^5 v^H M u: the L2 pairing of u and v weighted by |g|^{1/2}.
cdouble l2_inner(const TorusGalerkin& g, const FormField& u, const FormField& v);
cdouble l2_inner(const MetricField& g, const FormField& u, const FormField& v);
double l2_norm(const TorusGalerkin& g, const FormField& u);

/// Largest |<Au,v> -+ <u,Av>| / (|u| |v|) over random field pairs, with the
/// sign chosen by the advertised symmetry class; inputs are projected onto
/// the advertised domain first.
double symmetry_defect(const OperatorHandle& op, int trials, std::uint64_t seed);

/// Random k-form restricted to the co-exact subspace of g.
FormField random_coexact(const Galerkin& g, std::mt19937_64& rng, bool real = false);

} // namespace hodge5
