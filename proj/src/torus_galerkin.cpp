#include "hodge5/torus_galerkin.hpp"

#include "hodge5/parallel.hpp"

#include <Eigen/SVD>

#include <numbers>

namespace hodge5 {

namespace {

constexpr cdouble kI{0.0, 1.0};

void check_rank(int k, int lo, int hi, const char* what)
{
    if (k < lo || k > hi) {
        throw RankError(std::string(what) + ": rank " + std::to_string(k) + " outside " + std::to_string(lo) + ".." +
                        std::to_string(hi));
    }
}

} // namespace

TorusGalerkin::TorusGalerkin(MetricField g, int radius, GalerkinOptions options)
    : m_metric(std::move(g)), m_lattice(radius), m_options(options)
{
    if (!m_metric.is_constant()) {
        m_grid = m_metric.grid();
        if (m_grid->n() < m_lattice.side()) {
            throw ConfigurationError("metric grid with " + std::to_string(m_grid->n()) +
                                     " points per axis cannot resolve lattice radius " + std::to_string(radius) +
                                     " (need at least " + std::to_string(m_lattice.side()) + ")");
        }
    }

    const int modes = m_lattice.size();
    for (int k = 0; k <= 4; ++k) {
        auto& w = m_wedge[static_cast<std::size_t>(k)];
        w.resize(static_cast<std::size_t>(modes));
        for (int m = 0; m < modes; ++m) {
            w[static_cast<std::size_t>(m)] = covector_wedge_matrix(m_lattice.mode(m).cast<double>(), k);
        }
    }

    m_exact.resize(static_cast<std::size_t>(modes));
    m_complement.resize(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
        if (mode_is_zero(m)) {
            m_exact[static_cast<std::size_t>(m)] = Eigen::MatrixXd::Zero(10, 0);
            m_complement[static_cast<std::size_t>(m)] = Eigen::MatrixXd::Identity(10, 10);
            continue;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m_wedge[1][static_cast<std::size_t>(m)], Eigen::ComputeFullU);
        m_exact[static_cast<std::size_t>(m)] = svd.matrixU().leftCols(4);
        m_complement[static_cast<std::size_t>(m)] = svd.matrixU().rightCols(6);
    }

    if (m_metric.is_constant()) {
        const MetricTensor& gc = m_metric.constant_value();
        for (int k = 0; k <= 5; ++k) {
            m_const_mass[static_cast<std::size_t>(k)] = fiber_mass_matrix(gc, k);
            m_const_mass_inverse[static_cast<std::size_t>(k)] =
                m_const_mass[static_cast<std::size_t>(k)].llt().solve(Eigen::MatrixXd::Identity(form_dimension(k), form_dimension(k)));
        }
    } else {
        const int points = m_grid->size();
        for (int k = 0; k <= 2; ++k) {
            auto& gm = m_grid_mass[static_cast<std::size_t>(k)];
            gm.resize(static_cast<std::size_t>(points));
            parallel_for(points, [&](int p) { gm[static_cast<std::size_t>(p)] = fiber_mass_matrix(m_metric.at(p), k); });
            Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(form_dimension(k), form_dimension(k));
            for (const auto& w : gm) {
                mean += w;
            }
            mean /= points;
            m_mean_mass_inverse[static_cast<std::size_t>(k)] =
                mean.llt().solve(Eigen::MatrixXd::Identity(mean.rows(), mean.cols())).cast<cdouble>();
        }
    }
}

const CollocationGrid& TorusGalerkin::grid() const
{
    if (!m_grid) {
        throw ArgumentError("constant metric has no collocation grid");
    }
    return *m_grid;
}

const Eigen::MatrixXd& TorusGalerkin::wedge_block(int k, int mode) const
{
    check_rank(k, 0, 4, "wedge_block");
    return m_wedge[static_cast<std::size_t>(k)][static_cast<std::size_t>(mode)];
}

const Eigen::MatrixXd& TorusGalerkin::exact_frame(int mode) const
{
    return m_exact[static_cast<std::size_t>(mode)];
}

const Eigen::MatrixXd& TorusGalerkin::complement_frame(int mode) const
{
    return m_complement[static_cast<std::size_t>(mode)];
}

Eigen::VectorXcd TorusGalerkin::per_mode(
    const Eigen::VectorXcd& u, int in_dim, int out_dim,
    const std::function<void(int, const Eigen::VectorXcd&, Eigen::Ref<Eigen::VectorXcd>)>& f) const
{
    const int modes = m_lattice.size();
    if (u.size() != static_cast<long>(modes) * in_dim) {
        throw ArgumentError("coefficient vector has wrong length for this lattice and rank");
    }
    Eigen::VectorXcd out(static_cast<long>(modes) * out_dim);
    for (int m = 0; m < modes; ++m) {
        const Eigen::VectorXcd block = u.segment(static_cast<long>(m) * in_dim, in_dim);
        f(m, block, out.segment(static_cast<long>(m) * out_dim, out_dim));
    }
    return out;
}

Eigen::VectorXcd TorusGalerkin::d(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 0, 4, "exterior derivative");
    return per_mode(u, form_dimension(k), form_dimension(k + 1),
                    [&](int m, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) {
                        out.noalias() = kI * (wedge_block(k, m).cast<cdouble>() * b);
                    });
}

Eigen::VectorXcd TorusGalerkin::d_adjoint(int k, const Eigen::VectorXcd& v) const
{
    check_rank(k, 0, 4, "exterior derivative adjoint");
    return per_mode(v, form_dimension(k + 1), form_dimension(k),
                    [&](int m, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) {
                        out.noalias() = -kI * (wedge_block(k, m).transpose().cast<cdouble>() * b);
                    });
}

Eigen::VectorXcd TorusGalerkin::duality(int k, const Eigen::VectorXcd& u) const
{
    const Eigen::MatrixXcd e = duality_matrix(k).cast<cdouble>();
    return per_mode(u, form_dimension(k), form_dimension(5 - k),
                    [&](int, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) { out.noalias() = e * b; });
}

Eigen::VectorXcd TorusGalerkin::duality_transpose(int k, const Eigen::VectorXcd& v) const
{
    const Eigen::MatrixXcd et = duality_matrix(k).transpose().cast<cdouble>();
    return per_mode(v, form_dimension(5 - k), form_dimension(k),
                    [&](int, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) { out.noalias() = et * b; });
}

const Eigen::MatrixXd& TorusGalerkin::constant_fiber_mass(int k) const
{
    if (!constant_metric()) {
        throw ArgumentError("metric is not constant");
    }
    check_rank(k, 0, 5, "fiber mass");
    return m_const_mass[static_cast<std::size_t>(k)];
}

const std::vector<Eigen::MatrixXd>& TorusGalerkin::grid_fiber_mass(int k) const
{
    check_rank(k, 0, 2, "grid fiber mass");
    if (constant_metric()) {
        throw ArgumentError("constant metric has no grid");
    }
    return m_grid_mass[static_cast<std::size_t>(k)];
}

Eigen::VectorXcd TorusGalerkin::to_grid(int components, const Eigen::VectorXcd& coeffs) const
{
    return grid().synthesize(m_lattice, coeffs, components);
}

Eigen::VectorXcd TorusGalerkin::from_grid(int components, const Eigen::VectorXcd& values) const
{
    return grid().analyze(m_lattice, values, components);
}

Eigen::VectorXcd TorusGalerkin::sampled_mass(int k, const Eigen::VectorXcd& u) const
{
    const int c = form_dimension(k);
    Eigen::VectorXcd vals = to_grid(c, u);
    const auto& w = m_grid_mass[static_cast<std::size_t>(k)];
    for (int p = 0; p < grid().size(); ++p) {
        auto seg = vals.segment(static_cast<long>(p) * c, c);
        const Eigen::VectorXcd tmp = w[static_cast<std::size_t>(p)].cast<cdouble>() * seg;
        seg = tmp;
    }
    return from_grid(c, vals);
}

const Eigen::MatrixXcd& TorusGalerkin::dense_mass(int k) const
{
    check_rank(k, 0, 2, "dense mass");
    if (constant_metric()) {
        throw ArgumentError("dense mass is only assembled for sampled metrics");
    }
    if (dimension(k) > m_options.dense_threshold) {
        throw ConfigurationError("dense mass of dimension " + std::to_string(dimension(k)) + " exceeds threshold " +
                                 std::to_string(m_options.dense_threshold));
    }
    std::call_once(m_dense_once[static_cast<std::size_t>(k)], [&] {
        const int c = form_dimension(k);
        const int points = grid().size();
        const auto& w = m_grid_mass[static_cast<std::size_t>(k)];
        Eigen::VectorXcd flat(static_cast<long>(points) * c * c);
        for (int p = 0; p < points; ++p) {
            for (int i = 0; i < c; ++i) {
                for (int j = 0; j < c; ++j) {
                    flat(static_cast<long>(p) * c * c + i * c + j) = w[static_cast<std::size_t>(p)](i, j);
                }
            }
        }
        const Eigen::VectorXcd fourier = grid().full_spectrum(flat, c * c);
        const int modes = m_lattice.size();
        Eigen::MatrixXcd m(static_cast<long>(modes) * c, static_cast<long>(modes) * c);
        for (int a = 0; a < modes; ++a) {
            for (int b = 0; b < modes; ++b) {
                const Mode diff = m_lattice.mode(a) - m_lattice.mode(b);
                const long f = static_cast<long>(grid().frequency_index(diff)) * c * c;
                for (int i = 0; i < c; ++i) {
                    for (int j = 0; j < c; ++j) {
                        m(static_cast<long>(a) * c + i, static_cast<long>(b) * c + j) = fourier(f + i * c + j);
                    }
                }
            }
        }
        // Exactly Hermitian by construction up to rounding; symmetrize.
        m_dense_mass[static_cast<std::size_t>(k)] = 0.5 * (m + m.adjoint());
    });
    return m_dense_mass[static_cast<std::size_t>(k)];
}

const Eigen::LLT<Eigen::MatrixXcd>& TorusGalerkin::dense_factor(int k) const
{
    std::call_once(m_factor_once[static_cast<std::size_t>(k)], [&] {
        auto llt = std::make_unique<Eigen::LLT<Eigen::MatrixXcd>>(dense_mass(k));
        if (llt->info() != Eigen::Success) {
            throw NumericalError("mass matrix is not positive definite", 0.0);
        }
        m_factor[static_cast<std::size_t>(k)] = std::move(llt);
    });
    return *m_factor[static_cast<std::size_t>(k)];
}

Eigen::VectorXcd TorusGalerkin::sampled_mass_solve(int k, const Eigen::VectorXcd& u) const
{
    if (dimension(k) <= m_options.dense_threshold) {
        return dense_factor(k).solve(u);
    }
    const int c = form_dimension(k);
    const Eigen::MatrixXcd& pinv = m_mean_mass_inverse[static_cast<std::size_t>(k)];
    LinearMap apply = [&](const Eigen::VectorXcd& x) { return sampled_mass(k, x); };
    LinearMap precond = [&](const Eigen::VectorXcd& r) {
        return per_mode(r, c, c, [&](int, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) {
            out.noalias() = pinv * b;
        });
    };
    return conjugate_gradient(apply, u, precond, m_options.mass_cg, "mass solve").x;
}

Eigen::VectorXcd TorusGalerkin::mass(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 0, 5, "mass");
    if (constant_metric()) {
        const Eigen::MatrixXcd w = m_const_mass[static_cast<std::size_t>(k)].cast<cdouble>();
        const int c = form_dimension(k);
        return per_mode(u, c, c, [&](int, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) {
            out.noalias() = w * b;
        });
    }
    if (k <= 2) {
        return sampled_mass(k, u);
    }
    return duality_transpose(k, mass_solve(5 - k, duality(k, u)));
}

Eigen::VectorXcd TorusGalerkin::mass_solve(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 0, 5, "mass solve");
    if (constant_metric()) {
        const Eigen::MatrixXcd w = m_const_mass_inverse[static_cast<std::size_t>(k)].cast<cdouble>();
        const int c = form_dimension(k);
        return per_mode(u, c, c, [&](int, const Eigen::VectorXcd& b, Eigen::Ref<Eigen::VectorXcd> out) {
            out.noalias() = w * b;
        });
    }
    if (k <= 2) {
        return sampled_mass_solve(k, u);
    }
    return duality_transpose(k, mass(5 - k, duality(k, u)));
}

Eigen::VectorXcd TorusGalerkin::star(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 0, 5, "hodge star");
    if (k <= 2) {
        return duality(k, mass(k, u));
    }
    return mass_solve(5 - k, duality(k, u));
}

Eigen::VectorXcd TorusGalerkin::codifferential(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 1, 5, "codifferential");
    return mass_solve(k - 1, d_adjoint(k - 1, mass(k, u)));
}

Eigen::VectorXcd TorusGalerkin::laplacian(int k, const Eigen::VectorXcd& u) const
{
    check_rank(k, 0, 5, "hodge laplacian");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(u.size());
    if (k >= 1) {
        out += d(k - 1, codifferential(k, u));
    }
    if (k <= 4) {
        out += codifferential(k + 1, d(k, u));
    }
    return out;
}

Eigen::VectorXcd TorusGalerkin::beltrami(const Eigen::VectorXcd& u) const
{
    return star(3, d(2, u));
}

cdouble TorusGalerkin::inner(int k, const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) const
{
    return std::pow(2.0 * std::numbers::pi, 5) * v.dot(mass(k, u));
}

} // namespace hodge5
