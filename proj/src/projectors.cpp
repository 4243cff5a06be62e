#include "hodge5/torus_operators.hpp"

#include <Eigen/SVD>

namespace hodge5 {

namespace {

// Orthonormal basis of the column space of a, numerical rank cut at 1e-10 sigma_max.
Eigen::MatrixXd range_basis(const Eigen::MatrixXd& a)
{
    if (a.cols() == 0) {
        return Eigen::MatrixXd::Zero(a.rows(), 0);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
    const auto& s = svd.singularValues();
    const double cut = 1e-10 * (s.size() ? s(0) : 0.0);
    int r = 0;
    while (r < s.size() && s(r) > cut && s(r) > 0.0) {
        ++r;
    }
    return svd.matrixU().leftCols(r);
}

// W-orthogonal projector onto the column space of u (orthonormal columns).
Eigen::MatrixXd oblique_projector(const Eigen::MatrixXd& u, const Eigen::MatrixXd& w)
{
    if (u.cols() == 0) {
        return Eigen::MatrixXd::Zero(w.rows(), w.rows());
    }
    return u * (u.transpose() * w * u).llt().solve(u.transpose() * w);
}

Eigen::MatrixXd block_pinv(const Eigen::MatrixXd& a)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double cut = 1e-10 * (s.size() ? s(0) : 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (int i = 0; i < s.size(); ++i) {
        if (s(i) > cut && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct ModeProjectors {
    std::vector<Eigen::MatrixXcd> exact;
    std::vector<Eigen::MatrixXcd> coexact;
};

ModeProjectors constant_projectors(const TorusGalerkin& g, int k)
{
    const int modes = g.lattice().size();
    const int c = form_dimension(k);
    const Eigen::MatrixXd& w = g.constant_fiber_mass(k);
    const Eigen::MatrixXd winv = w.llt().solve(Eigen::MatrixXd::Identity(c, c));
    ModeProjectors p;
    p.exact.resize(static_cast<std::size_t>(modes));
    p.coexact.resize(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
        const Eigen::MatrixXd a = k >= 1 ? g.wedge_block(k - 1, m) : Eigen::MatrixXd::Zero(c, 0);
        const Eigen::MatrixXd b = k <= 4 ? Eigen::MatrixXd(winv * g.wedge_block(k, m).transpose())
                                         : Eigen::MatrixXd::Zero(c, 0);
        p.exact[static_cast<std::size_t>(m)] = oblique_projector(range_basis(a), w).cast<cdouble>();
        p.coexact[static_cast<std::size_t>(m)] = oblique_projector(range_basis(b), w).cast<cdouble>();
    }
    return p;
}

Eigen::VectorXcd apply_blocks(const std::vector<Eigen::MatrixXcd>& blocks, const Eigen::VectorXcd& u, int in_dim,
                              int out_dim)
{
    Eigen::VectorXcd out(static_cast<long>(blocks.size()) * out_dim);
    for (std::size_t m = 0; m < blocks.size(); ++m) {
        out.segment(static_cast<long>(m) * out_dim, out_dim).noalias() =
            blocks[m] * u.segment(static_cast<long>(m) * in_dim, in_dim);
    }
    return out;
}

struct SampledProjectorData {
    Galerkin g;
    int k;
    CgOptions cg;
    std::vector<Eigen::MatrixXcd> exact_precond;    // on rank k-1
    std::vector<Eigen::MatrixXcd> coexact_precond;  // on rank k+1
};

std::shared_ptr<SampledProjectorData> sampled_data(const Galerkin& g, int k, double tol)
{
    auto data = std::make_shared<SampledProjectorData>();
    data->g = g;
    data->k = k;
    data->cg = CgOptions{tol, 5000};
    const int modes = g->lattice().size();
    // Block preconditioners built from the grid-averaged fiber mass.
    const int c = form_dimension(k);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(c, c);
    if (k <= 2) {
        for (const auto& w : g->grid_fiber_mass(k)) {
            mean += w;
        }
        mean /= static_cast<double>(g->grid_fiber_mass(k).size());
    } else {
        Eigen::MatrixXd dual = Eigen::MatrixXd::Zero(form_dimension(5 - k), form_dimension(5 - k));
        for (const auto& w : g->grid_fiber_mass(5 - k)) {
            dual += w;
        }
        dual /= static_cast<double>(g->grid_fiber_mass(5 - k).size());
        mean = duality_matrix(k).transpose() * dual.inverse() * duality_matrix(k);
    }
    const Eigen::MatrixXd mean_inv = mean.inverse();
    data->exact_precond.resize(static_cast<std::size_t>(modes));
    data->coexact_precond.resize(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
        if (k >= 1) {
            const Eigen::MatrixXd& a = g->wedge_block(k - 1, m);
            data->exact_precond[static_cast<std::size_t>(m)] = block_pinv(a.transpose() * mean * a).cast<cdouble>();
        }
        if (k <= 4) {
            const Eigen::MatrixXd& b = g->wedge_block(k, m);
            data->coexact_precond[static_cast<std::size_t>(m)] = block_pinv(b * mean_inv * b.transpose()).cast<cdouble>();
        }
    }
    return data;
}

// Inputs already (nearly) in the kernel give a rhs made of rounding; judge
// convergence against |d| times the input scale instead.
CgOptions with_floor(const SampledProjectorData& s, double scale)
{
    CgOptions o = s.cg;
    o.absolute_floor = s.cg.tolerance * std::sqrt(5.0) * std::max(1, s.g->lattice().radius()) * scale;
    return o;
}

Eigen::VectorXcd sampled_exact(const SampledProjectorData& s, const Eigen::VectorXcd& u)
{
    const TorusGalerkin& g = *s.g;
    const int k = s.k;
    if (k == 0) {
        return Eigen::VectorXcd::Zero(u.size());
    }
    const int c = form_dimension(k - 1);
    LinearMap apply = [&](const Eigen::VectorXcd& a) { return g.d_adjoint(k - 1, g.mass(k, g.d(k - 1, a))); };
    LinearMap precond = [&](const Eigen::VectorXcd& r) { return apply_blocks(s.exact_precond, r, c, c); };
    const Eigen::VectorXcd mu = g.mass(k, u);
    const Eigen::VectorXcd rhs = g.d_adjoint(k - 1, mu);
    const CgResult res = conjugate_gradient(apply, rhs, precond, with_floor(s, mu.norm()), "exact projector");
    return g.d(k - 1, res.x);
}

Eigen::VectorXcd sampled_coexact(const SampledProjectorData& s, const Eigen::VectorXcd& u)
{
    const TorusGalerkin& g = *s.g;
    const int k = s.k;
    if (k == 5) {
        return Eigen::VectorXcd::Zero(u.size());
    }
    const int c = form_dimension(k + 1);
    LinearMap apply = [&](const Eigen::VectorXcd& y) { return g.d(k, g.mass_solve(k, g.d_adjoint(k, y))); };
    LinearMap precond = [&](const Eigen::VectorXcd& r) { return apply_blocks(s.coexact_precond, r, c, c); };
    const CgResult res = conjugate_gradient(apply, g.d(k, u), precond, with_floor(s, u.norm()), "co-exact projector");
    return g.mass_solve(k, g.d_adjoint(k, res.x));
}

OperatorHandle projector_handle(const Galerkin& g, int k, const std::string& name,
                                std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> f)
{
    OperatorHandle h;
    h.name = name;
    h.domain_rank = h.range_rank = k;
    h.symmetry = SymmetryClass::symmetric;
    h.kind = OperatorKind::projector;
    h.galerkin = g;
    h.map = [g, k, f = std::move(f)](const FormField& u) {
        FormField out(g->lattice(), k, f(u.coeffs()));
        if (u.is_real() && out.reality_defect() <= 1e-10) {
            // Projectors of a real metric commute with conjugation; clean rounding.
            out = out.real_part();
        }
        return out;
    };
    return h;
}

} // namespace

HodgeProjectors hodge_projectors(const Galerkin& g, int k, double tolerance)
{
    if (k < 0 || k > 5) {
        throw RankError("projector rank outside 0..5");
    }
    const int c = form_dimension(k);
    std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> exact;
    std::function<Eigen::VectorXcd(const Eigen::VectorXcd&)> coexact;
    if (g->constant_metric()) {
        auto p = std::make_shared<ModeProjectors>(constant_projectors(*g, k));
        exact = [p, c](const Eigen::VectorXcd& u) { return apply_blocks(p->exact, u, c, c); };
        coexact = [p, c](const Eigen::VectorXcd& u) { return apply_blocks(p->coexact, u, c, c); };
    } else {
        auto s = sampled_data(g, k, tolerance);
        exact = [s](const Eigen::VectorXcd& u) { return sampled_exact(*s, u); };
        coexact = [s](const Eigen::VectorXcd& u) { return sampled_coexact(*s, u); };
    }
    HodgeProjectors out;
    out.exact = projector_handle(g, k, "P_exact", exact);
    out.coexact = projector_handle(g, k, "P_coexact", coexact);
    out.harmonic = projector_handle(g, k, "P_harmonic", [exact, coexact](const Eigen::VectorXcd& u) {
        return Eigen::VectorXcd(u - exact(u) - coexact(u));
    });
    return out;
}

} // namespace hodge5
