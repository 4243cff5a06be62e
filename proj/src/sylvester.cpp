#include "hodge5/sylvester.hpp"

#include "hodge5/parallel.hpp"

#include <algorithm>

namespace hodge5 {

namespace {

bool is_real(const Matrix5cd& a)
{
    return a.imag().cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff());
}

} // namespace

GridTwoForm sample_two_form(const FormField& u, int grid_radius)
{
    if (u.rank() != 2) {
        throw RankError("expected a 2-form");
    }
    const CollocationGrid grid = CollocationGrid::with_radius(grid_radius);
    return {grid_radius, grid.synthesize(u.lattice(), u.coeffs(), 10)};
}

DensityResult density_construct(const MetricField& g, const GridTwoForm& w, const GridTwoForm& v,
                                const std::vector<char>& mask)
{
    if (w.grid_radius != v.grid_radius) {
        throw ConfigurationError("density_construct: w and v are sampled on different grids");
    }
    if (!g.is_constant() && g.grid_radius() != w.grid_radius) {
        throw ConfigurationError("density_construct: fields and metric are sampled on different grids");
    }
    const CollocationGrid grid = CollocationGrid::with_radius(w.grid_radius);
    const int n = grid.size();
    if (w.values.size() != 10L * n || v.values.size() != 10L * n) {
        throw ArgumentError("density_construct: expected 10 values per grid point");
    }
    if (!mask.empty() && static_cast<int>(mask.size()) != n) {
        throw ArgumentError("density_construct: mask size does not match the grid");
    }
    auto inside = [&](int p) { return mask.empty() || mask[static_cast<std::size_t>(p)] != 0; };

    std::vector<Matrix5cd> wm(static_cast<std::size_t>(n));
    std::vector<Matrix5cd> vm(static_cast<std::size_t>(n));
    double w_max = 0.0;
    double v_max = 0.0;
    for (int p = 0; p < n; ++p) {
        wm[static_cast<std::size_t>(p)] = two_form_matrix(w.values.segment(10L * p, 10));
        vm[static_cast<std::size_t>(p)] = two_form_matrix(v.values.segment(10L * p, 10));
        w_max = std::max(w_max, wm[static_cast<std::size_t>(p)].cwiseAbs().maxCoeff());
        v_max = std::max(v_max, vm[static_cast<std::size_t>(p)].cwiseAbs().maxCoeff());
    }
    int masked = 0;
    for (int p = 0; p < n; ++p) {
        if (!inside(p)) {
            if (vm[static_cast<std::size_t>(p)].cwiseAbs().maxCoeff() > 1e-12 * v_max) {
                throw ContractError("density_construct: v does not vanish off the mask");
            }
            continue;
        }
        ++masked;
        if (!(wm[static_cast<std::size_t>(p)].cwiseAbs().maxCoeff() >= 1e-8 * w_max) || w_max == 0.0) {
            throw ContractError("density_construct: w vanishes at masked grid point " + std::to_string(p));
        }
    }

    std::vector<SymTensor> t(static_cast<std::size_t>(n), SymTensor(Matrix5d(Matrix5d::Zero())));
    std::vector<double> resid(static_cast<std::size_t>(n), 0.0);
    parallel_for(n, [&](int p) {
        if (!inside(p)) {
            return;
        }
        const MetricTensor& gp = g.at(p);
        const Matrix5d& gs = gp.sqrt();
        const Matrix5d& gis = gp.inverse_sqrt();
        const Matrix5cd& wp = wm[static_cast<std::size_t>(p)];
        const Matrix5cd& vp = vm[static_cast<std::size_t>(p)];
        Matrix5cd tp;
        if (is_real(wp) && is_real(vp)) {
            Matrix5d wt = gis * wp.real() * gis;
            Matrix5d vt = gis * vp.real() * gis;
            wt = 0.5 * (wt - wt.transpose()).eval();
            vt = 0.5 * (vt - vt.transpose()).eval();
            const auto sol = solve_sylvester<double>(wt, vt);
            const Matrix5d tr = gs * sol.t * gs;
            tp = (0.5 * (tr + tr.transpose())).cast<cdouble>();
            t[static_cast<std::size_t>(p)] = SymTensor(Matrix5d(tp.real()));
        } else {
            const Matrix5cd gsc = gs.cast<cdouble>();
            const Matrix5cd gisc = gis.cast<cdouble>();
            Matrix5cd wt = gisc * wp * gisc;
            Matrix5cd vt = gisc * vp * gisc;
            wt = 0.5 * (wt - wt.transpose()).eval();
            vt = 0.5 * (vt - vt.transpose()).eval();
            const auto sol = solve_sylvester<cdouble>(wt, vt);
            const Matrix5cd tc = gsc * sol.t * gsc;
            tp = 0.5 * (tc + tc.transpose());
            t[static_cast<std::size_t>(p)] = SymTensor(tp);
        }
        const Matrix5cd ginv = gp.inverse().cast<cdouble>();
        resid[static_cast<std::size_t>(p)] = (tp * ginv * wp + wp * ginv * tp - vp).cwiseAbs().maxCoeff();
    });

    DensityResult out;
    out.t = SymTensorField::sampled(w.grid_radius, std::move(t));
    out.grid_radius = w.grid_radius;
    out.masked_points = masked;
    out.v_max = v_max;
    out.residual = *std::max_element(resid.begin(), resid.end());
    if (out.residual > 1e-8 * v_max) {
        throw InvariantViolation("density_construct: pointwise residual " + std::to_string(out.residual) +
                                 " exceeds 1e-8 |v|_inf");
    }
    return out;
}

DensityResult density_construct(const MetricField& g, const FormField& w, const FormField& v, const std::vector<char>& mask,
                                int grid_radius)
{
    w.require_compatible(v);
    int radius = grid_radius;
    if (!g.is_constant()) {
        radius = g.grid_radius();
    } else if (radius < 0) {
        radius = w.lattice().radius();
    }
    return density_construct(g, sample_two_form(w, radius), sample_two_form(v, radius), mask);
}

} // namespace hodge5
