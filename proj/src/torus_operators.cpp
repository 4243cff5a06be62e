#include "hodge5/torus_operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>

namespace hodge5 {

std::string to_string(SymmetryClass c)
{
    switch (c) {
    case SymmetryClass::symmetric:
        return "symmetric";
    case SymmetryClass::skew:
        return "skew";
    case SymmetryClass::hermitian_after_i:
        return "hermitian-after-i";
    case SymmetryClass::none:
        break;
    }
    return "none";
}

std::string to_string(DomainRestriction d)
{
    switch (d) {
    case DomainRestriction::full:
        return "full";
    case DomainRestriction::coexact:
        return "co-exact";
    case DomainRestriction::exact_harmonic:
        return "exact+harmonic";
    }
    return "full";
}

FormField OperatorHandle::operator()(const FormField& u) const
{
    if (u.rank() != domain_rank) {
        throw RankError(name + " expects rank " + std::to_string(domain_rank) + ", got " + std::to_string(u.rank()));
    }
    if (galerkin && u.lattice() != galerkin->lattice()) {
        throw ArgumentError(name + ": field lattice does not match the operator");
    }
    return map(u);
}

FormField exterior_d(const FormField& u)
{
    const int k = u.rank();
    if (k > 4) {
        throw RankError("exterior derivative of a 5-form");
    }
    const ModeLattice& lat = u.lattice();
    const int c = form_dimension(k + 1);
    Eigen::VectorXcd out(static_cast<long>(lat.size()) * c);
    for (int m = 0; m < lat.size(); ++m) {
        const Eigen::MatrixXd w = covector_wedge_matrix(lat.mode(m).cast<double>(), k);
        out.segment(static_cast<long>(m) * c, c) = cdouble(0.0, 1.0) * (w.cast<cdouble>() * u.block(m));
    }
    // Exact in floating point: the wedge matrix is odd in the mode.
    return FormField(lat, k + 1, std::move(out), u.is_real());
}

namespace {

FormField wrap(const TorusGalerkin& g, int rank, Eigen::VectorXcd c, bool real_input)
{
    FormField f(g.lattice(), rank, std::move(c));
    if (real_input && f.reality_defect() <= 1e-12) {
        f.mark_real();
    }
    return f;
}

void require_lattice(const TorusGalerkin& g, const FormField& u)
{
    if (u.lattice() != g.lattice()) {
        throw ArgumentError("field lattice does not match the discretization");
    }
}

} // namespace

FormField hodge_star_field(const TorusGalerkin& g, const FormField& u)
{
    require_lattice(g, u);
    return wrap(g, 5 - u.rank(), g.star(u.rank(), u.coeffs()), u.is_real());
}

FormField codifferential(const TorusGalerkin& g, const FormField& u)
{
    require_lattice(g, u);
    return wrap(g, u.rank() - 1, g.codifferential(u.rank(), u.coeffs()), u.is_real());
}

OperatorHandle beltrami(const Galerkin& g)
{
    OperatorHandle h;
    h.name = "beltrami";
    h.domain_rank = h.range_rank = 2;
    h.symmetry = SymmetryClass::skew;
    h.domain = DomainRestriction::full;
    h.kind = OperatorKind::beltrami;
    h.galerkin = g;
    h.map = [g](const FormField& u) { return wrap(*g, 2, g->beltrami(u.coeffs()), u.is_real()); };
    return h;
}

OperatorHandle hodge_laplacian(const Galerkin& g, int k)
{
    if (k < 0 || k > 5) {
        throw RankError("hodge laplacian rank outside 0..5");
    }
    OperatorHandle h;
    h.name = "hodge_laplacian(" + std::to_string(k) + ")";
    h.domain_rank = h.range_rank = k;
    h.symmetry = SymmetryClass::symmetric;
    h.domain = DomainRestriction::full;
    h.kind = OperatorKind::laplacian;
    h.galerkin = g;
    h.map = [g, k](const FormField& u) { return wrap(*g, k, g->laplacian(k, u.coeffs()), u.is_real()); };
    return h;
}

OperatorHandle identity_operator(const Galerkin& g, int k)
{
    OperatorHandle h;
    h.name = "identity";
    h.domain_rank = h.range_rank = k;
    h.symmetry = SymmetryClass::symmetric;
    h.kind = OperatorKind::generic;
    h.galerkin = g;
    h.map = [](const FormField& u) { return u; };
    return h;
}

BeltramiFiber beltrami_fiber(const MetricTensor& g, const Mode& q)
{
    if (q.isZero()) {
        throw DegenerateError("co-exact fiber is undefined at the zero mode");
    }
    const Vector5d qd = q.cast<double>();
    const Eigen::MatrixXd w = fiber_mass_matrix(g, 2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(covector_wedge_matrix(qd, 1), Eigen::ComputeFullU);
    const Eigen::MatrixXd z = svd.matrixU().leftCols(4);
    const Eigen::MatrixXd c = svd.matrixU().rightCols(6);
    const Eigen::MatrixXd y = c - z * (z.transpose() * w * z).llt().solve(z.transpose() * w * c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram(y.transpose() * w * y);
    const Eigen::MatrixXd basis = y * gram.operatorInverseSqrt();
    Eigen::MatrixXd a = basis.transpose() * duality_matrix(3) * covector_wedge_matrix(qd, 2) * basis;
    const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) {
        throw InvariantViolation("fiber Beltrami matrix is not symmetric (defect " + std::to_string(asym) + ")");
    }
    a = 0.5 * (a + a.transpose());
    return {a, basis};
}

std::vector<double> gauge_multiplier(const MetricField& g, const MetricField& g_eps)
{
    if (g.is_constant() && g_eps.is_constant()) {
        return {std::pow(g.constant_value().determinant() / g_eps.constant_value().determinant(), 0.25)};
    }
    if (!g.is_constant() && !g_eps.is_constant() && g.grid_radius() != g_eps.grid_radius()) {
        throw ConfigurationError("gauge unitary: metrics are sampled on different grids");
    }
    const int radius = g.is_constant() ? g_eps.grid_radius() : g.grid_radius();
    const int n = CollocationGrid::with_radius(radius).size();
    std::vector<double> m(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        m[static_cast<std::size_t>(p)] = std::pow(g.at(p).determinant() / g_eps.at(p).determinant(), 0.25);
    }
    return m;
}

OperatorHandle gauge_unitary(const Galerkin& g, const MetricField& g_eps, int k)
{
    const std::vector<double> mult = gauge_multiplier(g->metric(), g_eps);
    OperatorHandle h;
    h.name = "gauge_unitary";
    h.domain_rank = h.range_rank = k;
    h.symmetry = SymmetryClass::none;
    h.kind = OperatorKind::gauge;
    h.galerkin = g;
    if (mult.size() == 1) {
        const double s = mult.front();
        h.map = [s](const FormField& u) { return s * u; };
        return h;
    }
    const int radius = g->metric().is_constant() ? g_eps.grid_radius() : g->metric().grid_radius();
    const CollocationGrid grid = CollocationGrid::with_radius(radius);
    const int c = form_dimension(k);
    h.map = [grid, mult, c, k](const FormField& u) {
        Eigen::VectorXcd vals = grid.synthesize(u.lattice(), u.coeffs(), c);
        for (int p = 0; p < grid.size(); ++p) {
            vals.segment(static_cast<long>(p) * c, c) *= mult[static_cast<std::size_t>(p)];
        }
        FormField out(u.lattice(), k, grid.analyze(u.lattice(), vals, c));
        if (u.is_real() && out.reality_defect() <= 1e-12) {
            out.mark_real();
        }
        return out;
    };
    return h;
}

cdouble l2_inner(const TorusGalerkin& g, const FormField& u, const FormField& v)
{
    u.require_compatible(v);
    require_lattice(g, u);
    return g.inner(u.rank(), u.coeffs(), v.coeffs());
}

cdouble l2_inner(const MetricField& g, const FormField& u, const FormField& v)
{
    const TorusGalerkin gal(g, u.lattice().radius());
    return l2_inner(gal, u, v);
}

double l2_norm(const TorusGalerkin& g, const FormField& u)
{
    return std::sqrt(std::max(0.0, l2_inner(g, u, u).real()));
}

FormField random_coexact(const Galerkin& g, std::mt19937_64& rng, bool real)
{
    const FormField u = FormField::random(g->lattice(), 2, rng, real);
    return hodge_projectors(g, 2).coexact(u);
}

double symmetry_defect(const OperatorHandle& op, int trials, std::uint64_t seed)
{
    if (!op.galerkin) {
        throw ArgumentError("symmetry test needs an operator bound to a discretization");
    }
    if (op.domain_rank != op.range_rank) {
        throw RankError("symmetry test needs a square operator");
    }
    const TorusGalerkin& g = *op.galerkin;
    std::mt19937_64 rng(seed);
    std::optional<HodgeProjectors> proj;
    if (op.domain != DomainRestriction::full) {
        proj = hodge_projectors(op.galerkin, op.domain_rank);
    }
    const double sign = op.symmetry == SymmetryClass::symmetric ? -1.0 : 1.0;
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        FormField u = FormField::random(g.lattice(), op.domain_rank, rng);
        FormField v = FormField::random(g.lattice(), op.domain_rank, rng);
        if (proj) {
            if (op.domain == DomainRestriction::coexact) {
                u = proj->coexact(u);
                v = proj->coexact(v);
            } else {
                u = u - proj->coexact(u);
                v = v - proj->coexact(v);
            }
        }
        const cdouble lhs = l2_inner(g, op(u), v);
        const cdouble rhs = l2_inner(g, u, op(v));
        const double scale = l2_norm(g, u) * l2_norm(g, v);
        worst = std::max(worst, std::abs(lhs + sign * rhs) / scale);
    }
    return worst;
}

} // namespace hodge5
