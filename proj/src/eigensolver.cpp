#include "hodge5/eigensolver.hpp"

#include "hodge5/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <utility>

namespace hodge5 {

namespace {

constexpr cdouble kI{0.0, 1.0};

double volume()
{
    return std::pow(2.0 * std::numbers::pi, 5);
}

void fix_phase(Eigen::VectorXcd& c)
{
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        // Strictly larger so that ties resolve to the first index.
        if (std::abs(c(i)) > mag * (1.0 + 1e-12)) {
            mag = std::abs(c(i));
            best = i;
        }
    }
    if (mag > 0.0) {
        c *= std::conj(c(best)) / mag;
    }
}

enum class Quantity { beltrami, laplacian };

// One candidate eigenpair before vectors are materialized.
struct Candidate {
    double key;
    double lambda;
    int mode;
    int slot;
};

bool candidate_less(const Candidate& a, const Candidate& b)
{
    if (std::abs(a.key) != std::abs(b.key)) {
        return std::abs(a.key) < std::abs(b.key);
    }
    if (a.key != b.key) {
        return a.key < b.key;
    }
    if (a.mode != b.mode) {
        return a.mode < b.mode;
    }
    return a.slot < b.slot;
}

int resolve_count(int count, int total)
{
    return (count <= 0 || count > total) ? total : count;
}

// ---------------------------------------------------------------------------
// Constant metric: exact per-mode fiber problems.

SpectrumResult per_mode_spectrum(const TorusGalerkin& g, Quantity quantity, const SpectrumOptions& opt)
{
    const ModeLattice& lat = g.lattice();
    const MetricTensor& metric = g.metric().constant_value();
    const int modes = lat.size();
    std::vector<BeltramiFiber> fibers(static_cast<std::size_t>(modes));
    std::vector<Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>> solvers(static_cast<std::size_t>(modes));
    parallel_for(modes, [&](int m) {
        if (g.mode_is_zero(m)) {
            return;
        }
        fibers[static_cast<std::size_t>(m)] = beltrami_fiber(metric, lat.mode(m));
        solvers[static_cast<std::size_t>(m)].compute(fibers[static_cast<std::size_t>(m)].a);
    });
    std::vector<Candidate> all;
    all.reserve(static_cast<std::size_t>(modes) * 6);
    for (int m = 0; m < modes; ++m) {
        if (g.mode_is_zero(m)) {
            continue;
        }
        const auto& ev = solvers[static_cast<std::size_t>(m)].eigenvalues();
        for (int i = 0; i < 6; ++i) {
            const double lam = ev(i);
            all.push_back({quantity == Quantity::beltrami ? lam : lam * lam, lam, m, i});
        }
    }
    std::sort(all.begin(), all.end(), candidate_less);
    const int total = static_cast<int>(all.size());
    const int count = resolve_count(opt.count, total);

    SpectrumResult out;
    out.method = "per-mode";
    out.complete = count == total;
    if (count < total) {
        out.next_value = all[static_cast<std::size_t>(count)].key;
    }
    out.pairs.resize(static_cast<std::size_t>(count), EigenPair{0.0, FormField(lat, 2), 0.0});
    const Eigen::MatrixXd& w = g.constant_fiber_mass(2);
    const Eigen::MatrixXd e3 = duality_matrix(3);
    const Eigen::MatrixXd w_inv = w.inverse();
    parallel_for(count, [&](int idx) {
        const Candidate& c = all[static_cast<std::size_t>(idx)];
        EigenPair& p = out.pairs[static_cast<std::size_t>(idx)];
        p.value = c.key;
        const auto& fib = fibers[static_cast<std::size_t>(c.mode)];
        Eigen::VectorXcd v = (fib.basis * solvers[static_cast<std::size_t>(c.mode)].eigenvectors().col(c.slot)).cast<cdouble>();
        v /= std::sqrt(volume());
        fix_phase(v);
        // Residual of the mode block of -iB or -B^2 in the fiber mass norm.
        const Eigen::MatrixXcd b = kI * (w_inv * e3 * g.wedge_block(2, c.mode)).cast<cdouble>();
        Eigen::VectorXcd r;
        if (quantity == Quantity::beltrami) {
            r = -kI * (b * v) - c.lambda * v;
        } else {
            r = -(b * (b * v)) - c.key * v;
        }
        const Eigen::MatrixXcd wc = w.cast<cdouble>();
        p.residual = std::sqrt(std::abs(r.dot(wc * r)) / std::abs(v.dot(wc * v)));
        if (opt.vectors) {
            p.vector.block(c.mode) = v;
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Sampled metric, co-exact restriction. In the per-mode frames Q_q = [Z_q C_q]
// the co-exact subspace is parameterized by its C-coordinates w, with Schur
// mass S = M_CC - M_CZ M_ZZ^{-1} M_ZC and Beltrami pencil (F, S),
// F = blockdiag(C_q^T E_3 (q^) C_q).

struct FrameLayout {
    std::vector<int> z_offset;
    std::vector<int> z_size;
    std::vector<int> c_offset;
    int nz = 0;
    int nc = 0;
};

FrameLayout layout(const TorusGalerkin& g)
{
    FrameLayout l;
    const int modes = g.lattice().size();
    l.z_offset.resize(static_cast<std::size_t>(modes));
    l.z_size.resize(static_cast<std::size_t>(modes));
    l.c_offset.resize(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
        const int zs = g.mode_is_zero(m) ? 10 : 4;
        l.z_offset[static_cast<std::size_t>(m)] = l.nz;
        l.z_size[static_cast<std::size_t>(m)] = zs;
        l.c_offset[static_cast<std::size_t>(m)] = l.nc;
        l.nz += zs;
        l.nc += g.mode_is_zero(m) ? 0 : 6;
    }
    return l;
}

Eigen::MatrixXd z_frame(const TorusGalerkin& g, int m)
{
    return g.mode_is_zero(m) ? Eigen::MatrixXd::Identity(10, 10) : g.exact_frame(m);
}

Eigen::MatrixXd c_frame(const TorusGalerkin& g, int m)
{
    return g.mode_is_zero(m) ? Eigen::MatrixXd::Zero(10, 0) : g.complement_frame(m);
}

Eigen::MatrixXd f_block(const TorusGalerkin& g, int m)
{
    const Eigen::MatrixXd c = g.complement_frame(m);
    Eigen::MatrixXd f = c.transpose() * duality_matrix(3) * g.wedge_block(2, m) * c;
    return 0.5 * (f + f.transpose());
}

class CoexactCoordinates {
public:
    explicit CoexactCoordinates(const TorusGalerkin& g) : m_g(g), m_layout(layout(g))
    {
        const int modes = g.lattice().size();
        m_f.resize(static_cast<std::size_t>(modes));
        m_f_inv.resize(static_cast<std::size_t>(modes));
        m_zz_precond.resize(static_cast<std::size_t>(modes));
        Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(10, 10);
        for (const auto& w : g.grid_fiber_mass(2)) {
            mean += w;
        }
        mean /= static_cast<double>(g.grid_fiber_mass(2).size());
        for (int m = 0; m < modes; ++m) {
            const Eigen::MatrixXd z = z_frame(g, m);
            m_zz_precond[static_cast<std::size_t>(m)] = (z.transpose() * mean * z).inverse().cast<cdouble>();
            if (g.mode_is_zero(m)) {
                m_mean_values.emplace_back();
                m_mean_vectors.emplace_back();
                continue;
            }
            m_f[static_cast<std::size_t>(m)] = f_block(g, m);
            m_f_inv[static_cast<std::size_t>(m)] = m_f[static_cast<std::size_t>(m)].inverse();
            // Pencil (F_q, S_q) of the grid-averaged metric, used to precondition corrections.
            const Eigen::MatrixXd c = g.complement_frame(m);
            const Eigen::MatrixXd zw = z.transpose() * mean;
            Eigen::MatrixXd s = c.transpose() * mean * c - (zw * c).transpose() * (zw * z).llt().solve(zw * c);
            s = 0.5 * (s + s.transpose()).eval();
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(m_f[static_cast<std::size_t>(m)], s);
            m_mean_values.push_back(ges.eigenvalues());
            m_mean_vectors.push_back(ges.eigenvectors());
        }
    }

    const FrameLayout& frames() const { return m_layout; }
    int dimension() const { return m_layout.nc; }

    Eigen::VectorXcd embed_c(const Eigen::VectorXcd& w) const
    {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(m_g.dimension(2));
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            if (m_g.mode_is_zero(m)) {
                continue;
            }
            c.segment(10L * m, 10) = m_g.complement_frame(m) * w.segment(offset_c(m), 6);
        }
        return c;
    }

    Eigen::VectorXcd embed_z(const Eigen::VectorXcd& a) const
    {
        Eigen::VectorXcd c(m_g.dimension(2));
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            c.segment(10L * m, 10) = z_frame(m_g, m) * a.segment(offset_z(m), size_z(m));
        }
        return c;
    }

    Eigen::VectorXcd restrict_c(const Eigen::VectorXcd& y) const
    {
        Eigen::VectorXcd w(m_layout.nc);
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            if (!m_g.mode_is_zero(m)) {
                w.segment(offset_c(m), 6) = m_g.complement_frame(m).transpose() * y.segment(10L * m, 10);
            }
        }
        return w;
    }

    Eigen::VectorXcd restrict_z(const Eigen::VectorXcd& y) const
    {
        Eigen::VectorXcd a(m_layout.nz);
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            a.segment(offset_z(m), size_z(m)) = z_frame(m_g, m).transpose() * y.segment(10L * m, 10);
        }
        return a;
    }

    Eigen::VectorXcd solve_zz(const Eigen::VectorXcd& r) const
    {
        LinearMap apply = [&](const Eigen::VectorXcd& a) { return restrict_z(m_g.mass(2, embed_z(a))); };
        LinearMap precond = [&](const Eigen::VectorXcd& x) {
            Eigen::VectorXcd out(x.size());
            for (int m = 0; m < m_g.lattice().size(); ++m) {
                out.segment(offset_z(m), size_z(m)) = m_zz_precond[static_cast<std::size_t>(m)] * x.segment(offset_z(m), size_z(m));
            }
            return out;
        };
        return conjugate_gradient(apply, r, precond, CgOptions{1e-13, 5000}, "exact-block mass solve").x;
    }

    Eigen::VectorXcd schur(const Eigen::VectorXcd& w) const
    {
        const Eigen::VectorXcd y = m_g.mass(2, embed_c(w));
        const Eigen::VectorXcd a = solve_zz(restrict_z(y));
        return restrict_c(y) - restrict_c(m_g.mass(2, embed_z(a)));
    }

    Eigen::VectorXcd apply_f(const Eigen::VectorXcd& w, bool inverse) const
    {
        Eigen::VectorXcd out(w.size());
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            if (m_g.mode_is_zero(m)) {
                continue;
            }
            const auto& blk = inverse ? m_f_inv[static_cast<std::size_t>(m)] : m_f[static_cast<std::size_t>(m)];
            out.segment(offset_c(m), 6) = blk.cast<cdouble>() * w.segment(offset_c(m), 6);
        }
        return out;
    }

    /// (F - lambda S_mean)^{-1} r mode by mode, with near-singular modes clamped.
    Eigen::VectorXcd correction(const Eigen::VectorXcd& r, double lambda) const
    {
        Eigen::VectorXcd out(r.size());
        const double floor = 1e-8 * std::max(1.0, std::abs(lambda));
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            if (m_g.mode_is_zero(m)) {
                continue;
            }
            const auto& y = m_mean_vectors[static_cast<std::size_t>(m)];
            const auto& mu = m_mean_values[static_cast<std::size_t>(m)];
            Eigen::VectorXcd c = y.transpose().cast<cdouble>() * r.segment(offset_c(m), 6);
            for (int i = 0; i < 6; ++i) {
                double d = mu(i) - lambda;
                if (std::abs(d) < floor) {
                    d = d < 0.0 ? -floor : floor;
                }
                c(i) /= d;
            }
            out.segment(offset_c(m), 6) = y.cast<cdouble>() * c;
        }
        return out;
    }

    /// Eigenvectors of the mean-metric pencil with the `count` smallest |lambda|.
    std::vector<Eigen::VectorXcd> mean_metric_start(int count) const
    {
        std::vector<Candidate> all;
        for (int m = 0; m < m_g.lattice().size(); ++m) {
            if (m_g.mode_is_zero(m)) {
                continue;
            }
            for (int i = 0; i < 6; ++i) {
                const double mu = m_mean_values[static_cast<std::size_t>(m)](i);
                all.push_back({mu, mu, m, i});
            }
        }
        std::sort(all.begin(), all.end(), candidate_less);
        // Never cut a degenerate mean-metric level: any slice of it is an
        // arbitrary subspace and can miss true eigendirections entirely.
        int take = std::min<int>(count, static_cast<int>(all.size()));
        while (take > 0 && take < static_cast<int>(all.size()) &&
               std::abs(std::abs(all[static_cast<std::size_t>(take)].key) - std::abs(all[static_cast<std::size_t>(take - 1)].key)) <=
                   1e-8 * std::abs(all[static_cast<std::size_t>(take - 1)].key)) {
            ++take;
        }
        std::vector<Eigen::VectorXcd> out;
        for (int k = 0; k < take; ++k) {
            const Candidate& c = all[static_cast<std::size_t>(k)];
            Eigen::VectorXcd x = Eigen::VectorXcd::Zero(m_layout.nc);
            x.segment(offset_c(c.mode), 6) = m_mean_vectors[static_cast<std::size_t>(c.mode)].col(c.slot).cast<cdouble>();
            out.push_back(std::move(x));
        }
        return out;
    }

    /// Full coefficient vector of the co-exact field with C-coordinates w.
    Eigen::VectorXcd lift(const Eigen::VectorXcd& w) const
    {
        const Eigen::VectorXcd c = embed_c(w);
        const Eigen::VectorXcd a = solve_zz(restrict_z(m_g.mass(2, c)));
        return c - embed_z(a);
    }

private:
    int offset_c(int m) const { return m_layout.c_offset[static_cast<std::size_t>(m)]; }
    int offset_z(int m) const { return m_layout.z_offset[static_cast<std::size_t>(m)]; }
    int size_z(int m) const { return m_layout.z_size[static_cast<std::size_t>(m)]; }

    const TorusGalerkin& m_g;
    FrameLayout m_layout;
    std::vector<Eigen::MatrixXd> m_f;
    std::vector<Eigen::MatrixXd> m_f_inv;
    std::vector<Eigen::MatrixXcd> m_zz_precond;
    std::vector<Eigen::VectorXd> m_mean_values;
    std::vector<Eigen::MatrixXd> m_mean_vectors;
};

EigenPair finish_pair(const TorusGalerkin& g, Quantity quantity, double lambda, Eigen::VectorXcd c, bool keep_vector)
{
    c /= std::sqrt(std::abs(g.inner(2, c, c)));
    fix_phase(c);
    EigenPair p{quantity == Quantity::beltrami ? lambda : lambda * lambda, FormField(g.lattice(), 2), 0.0};
    const Eigen::VectorXcd bc = g.beltrami(c);
    Eigen::VectorXcd r;
    if (quantity == Quantity::beltrami) {
        r = -kI * bc - lambda * c;
    } else {
        r = -g.beltrami(bc) - lambda * lambda * c;
    }
    p.residual = std::sqrt(std::abs(g.inner(2, r, r)));
    if (keep_vector) {
        p.vector.coeffs() = c;
    }
    return p;
}

// Dense generalized eigensolve of the reduced pencil.
SpectrumResult dense_coexact_spectrum(const TorusGalerkin& g, Quantity quantity, const SpectrumOptions& opt)
{
    const FrameLayout l = layout(g);
    const Eigen::MatrixXcd& mass = g.dense_mass(2);
    const int modes = g.lattice().size();

    Eigen::MatrixXcd mzz(l.nz, l.nz);
    Eigen::MatrixXcd mzc(l.nz, l.nc);
    Eigen::MatrixXcd mcc(l.nc, l.nc);
    std::vector<Eigen::MatrixXcd> zf(static_cast<std::size_t>(modes));
    std::vector<Eigen::MatrixXcd> cf(static_cast<std::size_t>(modes));
    for (int m = 0; m < modes; ++m) {
        zf[static_cast<std::size_t>(m)] = z_frame(g, m).cast<cdouble>();
        cf[static_cast<std::size_t>(m)] = c_frame(g, m).cast<cdouble>();
    }
    parallel_for(modes, [&](int a) {
        const auto& za = zf[static_cast<std::size_t>(a)];
        const auto& ca = cf[static_cast<std::size_t>(a)];
        for (int b = 0; b < modes; ++b) {
            const auto blk = mass.block(10L * a, 10L * b, 10, 10);
            const auto& zb = zf[static_cast<std::size_t>(b)];
            const auto& cb = cf[static_cast<std::size_t>(b)];
            const int za0 = l.z_offset[static_cast<std::size_t>(a)];
            const int zb0 = l.z_offset[static_cast<std::size_t>(b)];
            const int ca0 = l.c_offset[static_cast<std::size_t>(a)];
            const int cb0 = l.c_offset[static_cast<std::size_t>(b)];
            const Eigen::MatrixXcd bz = blk * zb;
            const Eigen::MatrixXcd bc = blk * cb;
            mzz.block(za0, zb0, za.cols(), zb.cols()).noalias() = za.transpose() * bz;
            if (cb.cols()) {
                mzc.block(za0, cb0, za.cols(), cb.cols()).noalias() = za.transpose() * bc;
            }
            if (ca.cols() && cb.cols()) {
                mcc.block(ca0, cb0, ca.cols(), cb.cols()).noalias() = ca.transpose() * bc;
            }
        }
    });

    Eigen::LLT<Eigen::MatrixXcd> zz(mzz);
    if (zz.info() != Eigen::Success) {
        throw NumericalError("exact-block mass is not positive definite", 0.0);
    }
    const Eigen::MatrixXcd x = zz.solve(mzc);
    Eigen::MatrixXcd s = mcc;
    s.noalias() -= mzc.adjoint() * x;
    s = 0.5 * (s + s.adjoint()).eval();

    Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(l.nc, l.nc);
    for (int m = 0; m < modes; ++m) {
        if (!g.mode_is_zero(m)) {
            f.block(l.c_offset[static_cast<std::size_t>(m)], l.c_offset[static_cast<std::size_t>(m)], 6, 6) =
                f_block(g, m).cast<cdouble>();
        }
    }

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(
        f, s, (opt.vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly) | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success) {
        throw NumericalError("dense generalized eigensolver failed", 0.0);
    }
    const Eigen::VectorXd lam = ges.eigenvalues();

    std::vector<Candidate> all;
    for (int i = 0; i < lam.size(); ++i) {
        all.push_back({quantity == Quantity::beltrami ? lam(i) : lam(i) * lam(i), lam(i), 0, i});
    }
    std::sort(all.begin(), all.end(), candidate_less);
    const int total = static_cast<int>(all.size());
    const int count = resolve_count(opt.count, total);
    SpectrumResult out;
    out.method = "dense";
    out.complete = count == total;
    if (count < total) {
        out.next_value = all[static_cast<std::size_t>(count)].key;
    }
    if (!opt.vectors) {
        for (int i = 0; i < count; ++i) {
            out.pairs.push_back({all[static_cast<std::size_t>(i)].key, FormField(g.lattice(), 2), 0.0});
        }
        return out;
    }

    // Residuals in reduced coordinates: |F w - lambda S w|_{S^{-1}} / |w|_S
    // equals the full -iB residual in the g-norm for the lifted field.
    Eigen::MatrixXcd wsel(l.nc, count);
    Eigen::VectorXd lsel(count);
    for (int i = 0; i < count; ++i) {
        wsel.col(i) = ges.eigenvectors().col(all[static_cast<std::size_t>(i)].slot);
        lsel(i) = all[static_cast<std::size_t>(i)].lambda;
    }
    const Eigen::MatrixXcd sw = s * wsel;
    const Eigen::MatrixXcd fw = f * wsel;
    Eigen::LLT<Eigen::MatrixXcd> sllt(s);
    Eigen::MatrixXcd resid = fw - sw * lsel.asDiagonal();
    if (quantity == Quantity::laplacian) {
        // Delta = S^{-1} F S^{-1} F in reduced coordinates; residual in the S-norm.
        const Eigen::MatrixXcd t = sllt.solve(fw);
        resid = sllt.solve(f * t) - wsel * lsel.cwiseAbs2().asDiagonal();
    }
    const Eigen::MatrixXcd lifted_z = -(x * wsel);

    out.pairs.resize(static_cast<std::size_t>(count), EigenPair{0.0, FormField(g.lattice(), 2), 0.0});
    const Eigen::MatrixXcd sinv_resid = quantity == Quantity::beltrami ? Eigen::MatrixXcd(sllt.solve(resid)) : resid;
    parallel_for(count, [&](int i) {
        EigenPair& p = out.pairs[static_cast<std::size_t>(i)];
        p.value = all[static_cast<std::size_t>(i)].key;
        const double wnorm = std::sqrt(std::abs(wsel.col(i).dot(sw.col(i))));
        double rnorm;
        if (quantity == Quantity::beltrami) {
            rnorm = std::sqrt(std::abs(resid.col(i).dot(sinv_resid.col(i))));
        } else {
            rnorm = std::sqrt(std::abs(resid.col(i).dot(s * resid.col(i))));
        }
        p.residual = rnorm / wnorm;
        Eigen::VectorXcd c(g.dimension(2));
        for (int m = 0; m < modes; ++m) {
            const int zs = l.z_size[static_cast<std::size_t>(m)];
            Eigen::VectorXcd blk = zf[static_cast<std::size_t>(m)] * lifted_z.col(i).segment(l.z_offset[static_cast<std::size_t>(m)], zs);
            if (!g.mode_is_zero(m)) {
                blk += cf[static_cast<std::size_t>(m)] * wsel.col(i).segment(l.c_offset[static_cast<std::size_t>(m)], 6);
            }
            c.segment(10L * m, 10) = blk;
        }
        c /= std::sqrt(std::abs(g.inner(2, c, c)));
        fix_phase(c);
        p.vector.coeffs() = c;
    });
    return out;
}

// Restarted block subspace iteration for the largest-magnitude eigenvalues
// nu = 1/lambda of T = F^{-1} S, self-adjoint in the S pairing. Ritz values
// come from T; the basis grows by Davidson corrections preconditioned with
// the pencil of the grid-averaged metric.
SpectrumResult krylov_coexact_spectrum(const TorusGalerkin& g, Quantity quantity, const SpectrumOptions& opt)
{
    const CoexactCoordinates cc(g);
    const int n = cc.dimension();
    int want = opt.count > 0 ? std::min(opt.count, n) : n;
    if (quantity == Quantity::laplacian) {
        // Each Laplacian value comes from two Beltrami values +-lambda.
        want = std::min(n, want + want % 2);
    }
    const int block = std::min(n, std::max(4, std::min(want, 12)));
    const std::vector<Eigen::VectorXcd> start = cc.mean_metric_start(want + block);
    const int nstart = static_cast<int>(start.size());
    const int kmax = std::min(n, std::max(want + std::max(8 * block, 100), nstart + 4 * block));
    const int keep = std::min(kmax - block, std::max(want + 2 * block, nstart));

    Eigen::MatrixXcd v(n, kmax);
    Eigen::MatrixXcd sv(n, kmax);
    Eigen::MatrixXcd tv(n, kmax);  // F^{-1} S v
    int j = 0;

    auto append = [&](Eigen::VectorXcd x) {
        for (int pass = 0; pass < 2 && j > 0; ++pass) {
            x -= v.leftCols(j) * (sv.leftCols(j).adjoint() * x);
        }
        const Eigen::VectorXcd sx = cc.schur(x);
        const double nrm2 = x.dot(sx).real();
        if (!(nrm2 > 1e-24 * std::max(1.0, x.squaredNorm()))) {
            return false;
        }
        const double nrm = std::sqrt(nrm2);
        v.col(j) = x / nrm;
        sv.col(j) = sx / nrm;
        tv.col(j) = cc.apply_f(sv.col(j), true);
        ++j;
        return true;
    };

    // Start from the wanted eigenvectors of the grid-averaged metric.
    for (const auto& x : start) {
        if (j + block >= kmax) {
            break;
        }
        append(x);
    }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;

    Eigen::VectorXd nu;
    Eigen::MatrixXcd y;
    std::vector<int> order;
    std::vector<double> resid;
    const int max_steps = std::max(1, opt.max_restarts) * std::max(1, kmax / block);
    bool converged = false;
    for (int step = 0; step < max_steps; ++step) {
        Eigen::MatrixXcd h = sv.leftCols(j).adjoint() * tv.leftCols(j);
        h = 0.5 * (h + h.adjoint()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
        nu = es.eigenvalues();
        y = es.eigenvectors();
        order.resize(static_cast<std::size_t>(j));
        for (int i = 0; i < j; ++i) {
            order[static_cast<std::size_t>(i)] = i;
        }
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            if (std::abs(nu(a)) != std::abs(nu(b))) {
                return std::abs(nu(a)) > std::abs(nu(b));
            }
            return nu(a) > nu(b);
        });
        const int have = std::min(want, j);
        resid.assign(static_cast<std::size_t>(have), 0.0);
        std::vector<std::pair<double, int>> bad;
        for (int r = 0; r < have; ++r) {
            const int i = order[static_cast<std::size_t>(r)];
            const Eigen::VectorXcd w = v.leftCols(j) * y.col(i);
            const Eigen::VectorXcd swv = sv.leftCols(j) * y.col(i);
            const Eigen::VectorXcd fw = cc.apply_f(w, false);
            const double lam = 1.0 / nu(i);
            const double rel = (fw - lam * swv).norm() / std::max(fw.norm(), 1e-300);
            resid[static_cast<std::size_t>(r)] = rel;
            if (rel > opt.krylov_tolerance) {
                bad.emplace_back(rel, i);
            }
        }
        if (have == want && bad.empty()) {
            converged = true;
            break;
        }
        if (j == n) {
            // The basis spans the whole space; Ritz pairs are exact up to rounding.
            converged = true;
            break;
        }
        std::sort(bad.begin(), bad.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<Eigen::VectorXcd> expand;
        if (have < want) {
            for (int r = 0; r < std::min(block, j); ++r) {
                expand.push_back(tv.col(j - 1 - r));
            }
        } else {
            // Davidson step: precondition the pencil residual with the mean-metric blocks.
            for (std::size_t r = 0; r < bad.size() && static_cast<int>(r) < block; ++r) {
                const int i = bad[r].second;
                const double lam = 1.0 / nu(i);
                const Eigen::VectorXcd w = v.leftCols(j) * y.col(i);
                const Eigen::VectorXcd res = cc.apply_f(w, false) - lam * (sv.leftCols(j) * y.col(i));
                expand.push_back(cc.correction(res, lam));
            }
        }
        if (j + static_cast<int>(expand.size()) > kmax) {
            // Restart on the best Ritz vectors (already S-orthonormal).
            const int k = std::min(keep, j);
            Eigen::MatrixXcd ykeep(j, k);
            for (int r = 0; r < k; ++r) {
                ykeep.col(r) = y.col(order[static_cast<std::size_t>(r)]);
            }
            const Eigen::MatrixXcd nv = v.leftCols(j) * ykeep;
            const Eigen::MatrixXcd nsv = sv.leftCols(j) * ykeep;
            const Eigen::MatrixXcd ntv = tv.leftCols(j) * ykeep;
            v.leftCols(k) = nv;
            sv.leftCols(k) = nsv;
            tv.leftCols(k) = ntv;
            j = k;
        }
        bool grew = false;
        for (auto& x : expand) {
            grew = append(x) || grew;
        }
        if (!grew) {
            // Stagnation: inject a fresh random direction.
            Eigen::VectorXcd x(n);
            for (int i = 0; i < n; ++i) {
                const double re = normal(rng);
                x(i) = cdouble(re, normal(rng));
            }
            append(x);
        }
    }
    if (!converged) {
        const double worst = resid.empty() ? 1.0 : *std::max_element(resid.begin(), resid.end());
        throw NumericalError("Krylov eigensolver did not converge", worst);
    }

    std::vector<Candidate> sel;
    for (int r = 0; r < std::min(want, j); ++r) {
        const int i = order[static_cast<std::size_t>(r)];
        const double lam = 1.0 / nu(i);
        sel.push_back({quantity == Quantity::beltrami ? lam : lam * lam, lam, 0, i});
    }
    std::sort(sel.begin(), sel.end(), candidate_less);
    const int count = opt.count > 0 ? std::min(opt.count, static_cast<int>(sel.size())) : static_cast<int>(sel.size());
    SpectrumResult out;
    out.method = "krylov";
    out.complete = count == n;
    out.pairs.reserve(static_cast<std::size_t>(count));
    for (int r = 0; r < count; ++r) {
        const Candidate& c = sel[static_cast<std::size_t>(r)];
        const Eigen::VectorXcd w = v.leftCols(j) * y.col(c.slot);
        out.pairs.push_back(finish_pair(g, quantity, c.lambda, cc.lift(w), opt.vectors));
    }
    return out;
}

// Dense solve of an arbitrary handle on the full coefficient space.
SpectrumResult dense_generic_spectrum(const OperatorHandle& op, const SpectrumOptions& opt)
{
    const TorusGalerkin& g = *op.galerkin;
    const int k = op.domain_rank;
    const int n = g.dimension(k);
    if (n > opt.dense_threshold) {
        throw ContractError(op.name + ": full-space dimension " + std::to_string(n) + " exceeds the dense threshold");
    }
    if (op.symmetry == SymmetryClass::none) {
        throw ContractError(op.name + ": spectrum needs a symmetric or skew operator");
    }
    Eigen::MatrixXcd a(n, n);
    Eigen::MatrixXcd mass(n, n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
        e(i) = 1.0;
        a.col(i) = op(FormField(g.lattice(), k, e)).coeffs();
        mass.col(i) = g.mass(k, e);
    }
    mass = 0.5 * (mass + mass.adjoint()).eval();
    Eigen::MatrixXcd h = mass * a;
    if (op.symmetry != SymmetryClass::symmetric) {
        h *= -kI;
    }
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(h, mass, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success) {
        throw NumericalError("dense generalized eigensolver failed", 0.0);
    }
    const Eigen::VectorXd vals = ges.eigenvalues();
    const double scale = vals.size() ? vals.cwiseAbs().maxCoeff() : 0.0;
    std::vector<Candidate> all;
    for (int i = 0; i < vals.size(); ++i) {
        if (std::abs(vals(i)) > 1e-9 * std::max(scale, 1e-3)) {
            all.push_back({vals(i), vals(i), 0, i});
        }
    }
    std::sort(all.begin(), all.end(), candidate_less);
    const int total = static_cast<int>(all.size());
    const int count = resolve_count(opt.count, total);
    SpectrumResult out;
    out.method = "dense";
    out.complete = count == total;
    if (count < total) {
        out.next_value = all[static_cast<std::size_t>(count)].key;
    }
    const double vol = volume();
    for (int r = 0; r < count; ++r) {
        const Candidate& c = all[static_cast<std::size_t>(r)];
        Eigen::VectorXcd x = ges.eigenvectors().col(c.slot);
        x /= std::sqrt(vol * std::abs(x.dot(mass * x)));
        fix_phase(x);
        Eigen::VectorXcd ax = a * x;
        if (op.symmetry != SymmetryClass::symmetric) {
            ax *= -kI;
        }
        const Eigen::VectorXcd rv = ax - c.key * x;
        EigenPair p{c.key, FormField(g.lattice(), k), std::sqrt(vol * std::abs(rv.dot(mass * rv)))};
        if (opt.vectors) {
            p.vector.coeffs() = x;
        }
        out.pairs.push_back(std::move(p));
    }
    return out;
}

} // namespace

SpectrumResult compute_spectrum(const OperatorHandle& op, DomainRestriction subspace, const SpectrumOptions& opt)
{
    if (!op.galerkin) {
        throw ContractError(op.name + ": spectrum needs an operator bound to a discretization");
    }
    const TorusGalerkin& g = *op.galerkin;
    const bool structured = (op.kind == OperatorKind::beltrami) ||
                            (op.kind == OperatorKind::laplacian && op.domain_rank == 2);
    SpectrumResult res;
    if (subspace == DomainRestriction::coexact && structured) {
        const Quantity q = op.kind == OperatorKind::beltrami ? Quantity::beltrami : Quantity::laplacian;
        if (g.constant_metric()) {
            res = per_mode_spectrum(g, q, opt);
        } else {
            const int reduced = 6 * (g.lattice().size() - 1);
            const bool dense = reduced <= opt.dense_threshold && g.dimension(2) <= g.options().dense_threshold;
            res = dense ? dense_coexact_spectrum(g, q, opt) : krylov_coexact_spectrum(g, q, opt);
        }
    } else if (subspace == DomainRestriction::full) {
        res = dense_generic_spectrum(op, opt);
    } else {
        throw ContractError(op.name + ": restriction to " + to_string(subspace) + " is not supported");
    }
    for (const auto& p : res.pairs) {
        if (!(p.residual <= opt.residual_tolerance * std::max(1.0, std::abs(p.value)))) {
            throw NumericalError(op.name + ": eigenpair residual above tolerance", p.residual);
        }
    }
    return res;
}

std::vector<EigenPair> spectrum(const OperatorHandle& op, DomainRestriction subspace, const SpectrumOptions& options)
{
    return compute_spectrum(op, subspace, options).pairs;
}

// ---------------------------------------------------------------------------

int SpectrumReport::total_multiplicity() const
{
    int s = 0;
    for (const auto& c : clusters) {
        s += c.multiplicity;
    }
    return s;
}

nlohmann::json SpectrumReport::to_json() const
{
    nlohmann::json j;
    j["schema_version"] = 1;
    j["operator"] = operator_name;
    j["metric"] = metric;
    j["method"] = method;
    j["lattice_radius"] = lattice_radius;
    j["requested"] = requested;
    j["cluster_tolerance"] = tolerance;
    nlohmann::json cl = nlohmann::json::array();
    for (const auto& c : clusters) {
        double rmax = 0.0;
        for (double r : c.residuals) {
            rmax = std::max(rmax, r);
        }
        cl.push_back({{"value", c.value},
                      {"multiplicity", c.multiplicity},
                      {"max_residual", rmax},
                      {"resolved", c.resolved},
                      {"verdict", c.verdict},
                      {"members", c.members},
                      {"residuals", c.residuals}});
    }
    j["clusters"] = cl;
    return j;
}

std::string SpectrumReport::to_csv() const
{
    std::ostringstream os;
    os.precision(17);
    os << "index,value,multiplicity,max_residual,resolved,verdict\n";
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const auto& c = clusters[i];
        double rmax = 0.0;
        for (double r : c.residuals) {
            rmax = std::max(rmax, r);
        }
        os << i << ',' << c.value << ',' << c.multiplicity << ',' << rmax << ',' << (c.resolved ? "true" : "false") << ','
           << c.verdict << '\n';
    }
    return os.str();
}

double default_cluster_tolerance(const std::vector<double>& values)
{
    if (values.empty()) {
        return 1e-7;
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double spread = *hi - *lo;
    return spread > 0.0 ? 1e-7 * spread : 1e-7 * std::max(1.0, std::abs(*lo));
}

SpectrumReport cluster(std::vector<double> values, double tol)
{
    SpectrumReport rep;
    rep.tolerance = tol;
    rep.requested = static_cast<int>(values.size());
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw ArgumentError("cluster: non-finite value");
        }
    }
    std::sort(values.begin(), values.end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i == 0 || values[i] - values[i - 1] > tol) {
            rep.clusters.push_back({});
        }
        rep.clusters.back().members.push_back(values[i]);
    }
    for (auto& c : rep.clusters) {
        c.multiplicity = static_cast<int>(c.members.size());
        double s = 0.0;
        for (double m : c.members) {
            s += m;
        }
        c.value = s / c.multiplicity;
    }
    return rep;
}

double beltrami_residual(const TorusGalerkin& g, const FormField& u, double lambda)
{
    const Eigen::VectorXcd r = g.beltrami(u.coeffs()) - kI * lambda * u.coeffs();
    return std::sqrt(std::abs(g.inner(2, r, r)) / std::abs(g.inner(2, u.coeffs(), u.coeffs())));
}

RealPair realify(const Galerkin& gp, const FormField& omega, double lambda)
{
    const TorusGalerkin& g = *gp;
    if (lambda == 0.0) {
        throw DegenerateError("realify needs a nonzero Beltrami eigenvalue");
    }
    if (omega.rank() != 2) {
        throw RankError("realify expects a 2-form");
    }
    const double res = beltrami_residual(g, omega, lambda);
    if (!(res <= 1e-9 * std::max(1.0, std::abs(lambda)))) {
        throw ContractError("realify: input is not a Beltrami eigenfield (residual " + std::to_string(res) + ")");
    }
    RealPair p{omega.real_part(), omega.imag_part()};
    p.lambda = lambda;
    const double na = l2_norm(g, p.alpha);
    const double nb = l2_norm(g, p.beta);
    if (na == 0.0 || nb == 0.0) {
        throw InvariantViolation("realify: real or imaginary part vanishes");
    }
    p.alpha *= 1.0 / na;
    p.beta *= 1.0 / nb;
    const Eigen::VectorXcd& a = std::as_const(p.alpha).coeffs();
    const Eigen::VectorXcd& b = std::as_const(p.beta).coeffs();
    const Eigen::VectorXcd ba = g.beltrami(a);
    const Eigen::VectorXcd bb = g.beltrami(b);
    auto norm = [&](const Eigen::VectorXcd& x) { return std::sqrt(std::abs(g.inner(2, x, x))); };
    p.beltrami_alpha_defect = norm(ba + lambda * b);
    p.beltrami_beta_defect = norm(bb - lambda * a);
    const cdouble ab = g.inner(2, a, b);
    p.cross_inner = std::abs(ab);
    p.laplace_alpha_defect = norm(g.laplacian(2, a) - lambda * lambda * a);
    p.laplace_beta_defect = norm(g.laplacian(2, b) - lambda * lambda * b);
    Eigen::Matrix2cd gram;
    gram << 1.0, std::conj(ab), ab, 1.0;
    p.independence = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(gram).eigenvalues().minCoeff();
    if (p.independence < 1e-8) {
        throw InvariantViolation("realify: alpha and beta are linearly dependent");
    }
    return p;
}

SpectrumReport pair_spectrum(const Galerkin& g, const PairOptions& options)
{
    SpectrumOptions so = options.spectrum;
    so.count = options.count;
    const SpectrumResult res = compute_spectrum(hodge_laplacian(g, 2), DomainRestriction::coexact, so);
    std::vector<double> values;
    for (const auto& p : res.pairs) {
        values.push_back(p.value);
    }
    const double tol = options.cluster_tolerance > 0.0 ? options.cluster_tolerance : default_cluster_tolerance(values);
    SpectrumReport rep = cluster(values, tol);
    rep.operator_name = "hodge_laplacian(2) co-exact, real";
    rep.metric = g->metric().describe();
    rep.method = res.method;
    rep.lattice_radius = g->lattice().radius();
    // Residuals in value order (pairs are sorted ascending for the Laplacian).
    std::size_t idx = 0;
    for (auto& c : rep.clusters) {
        for (int i = 0; i < c.multiplicity; ++i) {
            c.residuals.push_back(res.pairs[idx++].residual);
        }
    }
    if (!rep.clusters.empty() && !res.complete) {
        auto& last = rep.clusters.back();
        last.resolved = res.next_value.has_value() && (*res.next_value - last.members.back() > tol);
    }
    for (auto& c : rep.clusters) {
        if (!c.resolved) {
            c.verdict = "unresolved";
        } else if (c.multiplicity == 2) {
            c.verdict = "pair";
        } else if (c.multiplicity % 2 == 0) {
            c.verdict = "non-generic";
        } else {
            throw InvariantViolation("odd multiplicity " + std::to_string(c.multiplicity) + " at resolved eigenvalue " +
                                     std::to_string(c.value));
        }
    }
    return rep;
}

} // namespace hodge5
