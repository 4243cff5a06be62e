#include "hodge5/perturbation.hpp"

#include "hodge5/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace hodge5 {

namespace {

constexpr cdouble kI{0.0, 1.0};

double volume()
{
    return std::pow(2.0 * std::numbers::pi, 5);
}

Matrix5cd s_form_on_matrix(const MetricTensor& g, const Matrix5cd& h, const Matrix5cd& w)
{
    const Matrix5cd ginv = g.inverse().cast<cdouble>();
    const cdouble tr = (ginv * h).trace();
    return -0.5 * tr * w + h * ginv * w + w * ginv * h;
}

void require_lattice(const TorusGalerkin& g, const FormField& u)
{
    if (u.lattice() != g.lattice()) {
        throw ArgumentError("field lattice does not match the discretization");
    }
}

// P(W S(h) u): the right-hand side whose mass solve is s_form.
Eigen::VectorXcd s_moment(const TorusGalerkin& g, const Direction& h, const FormField& u)
{
    if (u.rank() != 2) {
        throw RankError("S(h, .) acts on 2-forms");
    }
    require_lattice(g, u);
    const MetricField& metric = g.metric();
    const auto radius = common_grid_radius(metric, h);
    const ModeLattice& lat = g.lattice();
    if (!radius) {
        const Eigen::MatrixXcd ws = g.constant_fiber_mass(2).cast<cdouble>() *
                                    s_form_matrix(metric.constant_value(), h.constant_value());
        Eigen::VectorXcd y(u.coeffs().size());
        for (int m = 0; m < lat.size(); ++m) {
            y.segment(10L * m, 10) = ws * u.block(m);
        }
        return y;
    }
    const CollocationGrid grid = CollocationGrid::with_radius(*radius);
    Eigen::VectorXcd vals = grid.synthesize(lat, u.coeffs(), 10);
    parallel_for(grid.size(), [&](int p) {
        const MetricTensor& gp = metric.at(p);
        const Eigen::MatrixXcd ws = fiber_mass_matrix(gp, 2).cast<cdouble>() * s_form_matrix(gp, h.at(p));
        auto seg = vals.segment(10L * p, 10);
        const Eigen::VectorXcd tmp = ws * seg;
        seg = tmp;
    });
    return grid.analyze(lat, vals, 10);
}

} // namespace

Eigen::MatrixXcd s_form_matrix(const MetricTensor& g, const SymTensor& h)
{
    Eigen::MatrixXcd s(10, 10);
    for (int j = 0; j < 10; ++j) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(10);
        e(j) = 1.0;
        s.col(j) = two_form_coefficients(s_form_on_matrix(g, h.matrix(), two_form_matrix(e)));
    }
    return s;
}

FormFiber s_form(const MetricTensor& g, const SymTensor& h, const FormFiber& w)
{
    if (w.rank != 2) {
        throw RankError("S(h, .) acts on 2-forms");
    }
    const Matrix5cd s = s_form_on_matrix(g, h.matrix(), two_form_matrix(w.coeffs));
    return FormFiber(2, two_form_coefficients(s), promote(w.kind, h.kind()));
}

FormFiber traceless_s_form(const MetricTensor& g, const SymTensor& t, const FormFiber& w)
{
    if (w.rank != 2) {
        throw RankError("S(h, .) acts on 2-forms");
    }
    const Matrix5cd ginv = g.inverse().cast<cdouble>();
    const Matrix5cd wm = two_form_matrix(w.coeffs);
    const Matrix5cd s = t.matrix() * ginv * wm + wm * ginv * t.matrix();
    return FormFiber(2, two_form_coefficients(s), promote(w.kind, t.kind()));
}

FormField s_form(const Galerkin& g, const Direction& h, const FormField& w)
{
    FormField out(g->lattice(), 2, g->mass_solve(2, s_moment(*g, h, w)));
    if (w.is_real() && h.kind() == ScalarKind::real && out.reality_defect() <= 1e-10) {
        out = out.real_part();
    }
    return out;
}

FormField s_form(const MetricField& g, const Direction& h, const FormField& w)
{
    return s_form(TorusGalerkin::create(g, w.lattice().radius()), h, w);
}

cdouble s_pairing(const Galerkin& g, const Direction& h, const FormField& u, const FormField& v)
{
    require_lattice(*g, v);
    return volume() * v.coeffs().dot(s_moment(*g, h, u));
}

FormField d_beltrami(const Galerkin& g, const Direction& h, const FormField& u, double lambda)
{
    require_lattice(*g, u);
    const double res = beltrami_residual(*g, u, lambda);
    if (!(res <= 1e-8)) {
        throw ContractError("d_beltrami: input is not an eigenfield at lambda (relative residual " + std::to_string(res) + ")");
    }
    FormField s = s_form(g, h, u);
    s *= kI * lambda;
    return s;
}

FormField d_beltrami(const MetricField& g, const Direction& h, const FormField& u, double lambda)
{
    return d_beltrami(TorusGalerkin::create(g, u.lattice().radius()), h, u, lambda);
}

std::vector<cdouble> metric_trace(const MetricField& g, const Direction& h)
{
    const auto radius = common_grid_radius(g, h);
    if (!radius) {
        return {trace(g.constant_value(), h.constant_value())};
    }
    const int n = CollocationGrid::with_radius(*radius).size();
    std::vector<cdouble> out(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        out[static_cast<std::size_t>(p)] = trace(g.at(p), h.at(p));
    }
    return out;
}

Direction traceless_shift(const MetricField& g, const Direction& t)
{
    auto shift = [](const MetricTensor& gp, const SymTensor& tp) {
        const cdouble tr = trace(gp, tp);
        return SymTensor(Matrix5cd(tp.matrix() - tr * gp.matrix().cast<cdouble>()));
    };
    const auto radius = common_grid_radius(g, t);
    if (!radius) {
        return Direction::constant(shift(g.constant_value(), t.constant_value()));
    }
    const int n = CollocationGrid::with_radius(*radius).size();
    std::vector<SymTensor> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        samples.push_back(shift(g.at(p), t.at(p)));
    }
    return Direction::sampled(*radius, std::move(samples));
}

MetricDerivativeReport metric_derivative_identities(const MetricTensor& g, const SymTensor& h, double eps)
{
    if (h.kind() == ScalarKind::complex) {
        throw ArgumentError("metric derivatives need a real direction");
    }
    const Matrix5d hm = h.real_matrix();
    const MetricTensor plus(g.matrix() + eps * hm);
    const MetricTensor minus(g.matrix() - eps * hm);
    auto rel = [](double err, double scale) { return scale > 0.0 ? err / scale : err; };

    MetricDerivativeReport r;
    r.eps = eps;
    r.inverse_fd = (plus.inverse() - minus.inverse()) / (2.0 * eps);
    r.inverse_exact = -g.inverse() * hm * g.inverse();
    r.inverse_error = rel((r.inverse_fd - r.inverse_exact).norm(), r.inverse_exact.norm());
    r.sqrt_det_fd = (plus.sqrt_determinant() - minus.sqrt_determinant()) / (2.0 * eps);
    r.sqrt_det_exact = 0.5 * g.sqrt_determinant() * (g.inverse() * hm).trace();
    r.sqrt_det_error = rel(std::abs(r.sqrt_det_fd - r.sqrt_det_exact), std::abs(r.sqrt_det_exact));
    r.det_log_derivative = (plus.determinant() - minus.determinant()) / (2.0 * eps * g.determinant());
    return r;
}

Eigenspace beltrami_eigenspace(const Galerkin& g, double lambda, const SpectrumOptions& options, double tol)
{
    const OperatorHandle b = beltrami(g);
    SpectrumOptions values_only = options;
    values_only.vectors = false;
    const SpectrumResult all = compute_spectrum(b, DomainRestriction::coexact, values_only);
    const double cut = tol * std::max(1.0, std::abs(lambda));
    int last = -1;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < all.pairs.size(); ++i) {
        const double d = std::abs(all.pairs[i].value - lambda);
        if (d <= cut) {
            last = static_cast<int>(i);
        } else {
            gap = std::min(gap, d);
        }
    }
    if (last < 0) {
        throw ContractError("no Beltrami eigenvalue within " + std::to_string(cut) + " of " + std::to_string(lambda));
    }
    if (all.next_value) {
        gap = std::min(gap, std::abs(std::abs(*all.next_value) - std::abs(lambda)));
    }
    SpectrumOptions with_vectors = options;
    with_vectors.vectors = true;
    with_vectors.count = last + 1;
    const SpectrumResult sel = compute_spectrum(b, DomainRestriction::coexact, with_vectors);
    Eigenspace e;
    e.lambda = lambda;
    e.gap = gap;
    for (const auto& p : sel.pairs) {
        if (std::abs(p.value - lambda) <= cut) {
            e.basis.push_back(p.vector);
        }
    }
    return e;
}

double SplittingPrediction::spread() const
{
    return slopes.size() ? slopes.maxCoeff() - slopes.minCoeff() : 0.0;
}

SplittingPrediction predict_splitting(const Galerkin& g, const Direction& h, double lambda,
                                      const std::vector<FormField>& basis)
{
    const int m = static_cast<int>(basis.size());
    if (m == 0) {
        throw ContractError("predict_splitting needs a nonempty eigenbasis");
    }
    Eigen::MatrixXcd gram(m, m);
    for (int j = 0; j < m; ++j) {
        for (int k = 0; k < m; ++k) {
            gram(j, k) = l2_inner(*g, basis[static_cast<std::size_t>(j)], basis[static_cast<std::size_t>(k)]);
        }
    }
    const double gram_defect = (gram - Eigen::MatrixXcd::Identity(m, m)).cwiseAbs().maxCoeff();
    if (gram_defect > 1e-9) {
        throw ContractError("predict_splitting: basis is not orthonormal (Gram defect " + std::to_string(gram_defect) + ")");
    }
    for (const auto& u : basis) {
        const double res = beltrami_residual(*g, u, lambda);
        if (!(res <= 1e-8)) {
            throw ContractError("predict_splitting: basis element is not an eigenfield (residual " + std::to_string(res) + ")");
        }
    }

    SplittingPrediction p;
    p.lambda = lambda;
    p.m = m;
    p.matrix.resize(m, m);
    std::vector<Eigen::VectorXcd> moments(static_cast<std::size_t>(m));
    parallel_for(m, [&](int j) { moments[static_cast<std::size_t>(j)] = s_moment(*g, h, basis[static_cast<std::size_t>(j)]); });
    for (int j = 0; j < m; ++j) {
        for (int k = 0; k < m; ++k) {
            p.matrix(j, k) = lambda * volume() * basis[static_cast<std::size_t>(k)].coeffs().dot(moments[static_cast<std::size_t>(j)]);
        }
    }
    const double scale = p.matrix.norm();
    p.hermitian_defect = scale > 0.0 ? (p.matrix - p.matrix.adjoint()).norm() / scale : 0.0;
    if (p.hermitian_defect > 1e-9) {
        throw InvariantViolation("degenerate perturbation matrix is not Hermitian (defect " +
                                 std::to_string(p.hermitian_defect) + ")");
    }
    // M_jk pairs S u_j with u_k, so the matrix of the form in the basis is M^T.
    const Eigen::MatrixXcd herm = 0.5 * (p.matrix.transpose() + p.matrix.conjugate());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(herm);
    p.slopes = es.eigenvalues();
    p.rotation = es.eigenvectors();
    for (int c = 0; c < m; ++c) {
        FormField v(g->lattice(), 2);
        for (int j = 0; j < m; ++j) {
            v.coeffs() += p.rotation(j, c) * basis[static_cast<std::size_t>(j)].coeffs();
        }
        p.adapted_basis.push_back(std::move(v));
    }
    return p;
}

namespace {

std::vector<double> beltrami_values(const Galerkin& g, const SpectrumOptions& options)
{
    SpectrumOptions o = options;
    o.vectors = false;
    const SpectrumResult r = compute_spectrum(beltrami(g), DomainRestriction::coexact, o);
    std::vector<double> v;
    v.reserve(r.pairs.size());
    for (const auto& p : r.pairs) {
        v.push_back(p.value);
    }
    return v;
}

} // namespace

BranchTrace trace_branches(const Galerkin& g, const Direction& h, double lambda, const BranchOptions& options)
{
    if (options.eps_grid.size() < static_cast<std::size_t>(options.degree)) {
        throw ArgumentError("trace_branches: eps grid has fewer points than the fit degree");
    }
    const std::vector<double> base = beltrami_values(g, options.spectrum);
    const double cut = options.multiplicity_tolerance * std::max(1.0, std::abs(lambda));
    int m = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (double v : base) {
        const double d = std::abs(v - lambda);
        if (d <= cut) {
            ++m;
        } else {
            gap = std::min(gap, d);
        }
    }
    if (m == 0) {
        throw ContractError("trace_branches: lambda is not in the computed spectrum");
    }
    if (options.gap > 0.0) {
        gap = options.gap;
    }
    if (!std::isfinite(gap)) {
        throw GapTooSmallError("trace_branches: no isolating gap could be determined");
    }

    BranchTrace t;
    t.lambda = lambda;
    t.m = m;
    t.window = gap / 2.0;
    t.eps = options.eps_grid;
    std::sort(t.eps.begin(), t.eps.end());
    t.branches.resize(t.eps.size());
    for (std::size_t i = 0; i < t.eps.size(); ++i) {
        const double eps = t.eps[i];
        const MetricField ge = perturb(g->metric(), h, eps);
        const Galerkin gal = TorusGalerkin::create(ge, g->lattice().radius(), g->options());
        std::vector<double> captured;
        for (double v : beltrami_values(gal, options.spectrum)) {
            if (std::abs(v - lambda) < t.window) {
                captured.push_back(v);
            }
        }
        if (static_cast<int>(captured.size()) != m) {
            throw GapTooSmallError("trace_branches: window around " + std::to_string(lambda) + " captured " +
                                   std::to_string(captured.size()) + " eigenvalues at eps = " + std::to_string(eps) +
                                   ", expected " + std::to_string(m));
        }
        if (eps >= 0.0) {
            std::sort(captured.begin(), captured.end());
        } else {
            std::sort(captured.begin(), captured.end(), std::greater<>());
        }
        t.branches[i] = std::move(captured);
    }

    // l_j(eps) - lambda = sum_{d=1..degree} c_d eps^d
    const int n = static_cast<int>(t.eps.size());
    Eigen::MatrixXd a(n, options.degree);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < options.degree; ++d) {
            a(i, d) = std::pow(t.eps[static_cast<std::size_t>(i)], d + 1);
        }
    }
    const auto qr = a.colPivHouseholderQr();
    t.slopes.resize(m);
    for (int j = 0; j < m; ++j) {
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            y(i) = t.branches[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - lambda;
        }
        t.slopes(j) = qr.solve(y)(0);
    }
    return t;
}

double residual_order(const BranchTrace& trace, const Eigen::VectorXd& slopes)
{
    if (slopes.size() != trace.m) {
        throw ArgumentError("residual_order: slope count does not match the branch count");
    }
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < trace.eps.size(); ++i) {
        const double eps = trace.eps[i];
        double worst = 0.0;
        for (int j = 0; j < trace.m; ++j) {
            worst = std::max(worst, std::abs(trace.branches[i][static_cast<std::size_t>(j)] - trace.lambda - eps * slopes(j)));
        }
        if (eps != 0.0 && worst > 0.0) {
            xs.push_back(std::log(std::abs(eps)));
            ys.push_back(std::log(worst));
        }
    }
    if (xs.size() < 2) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double den = n * sxx - sx * sx;
    if (den == 0.0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return (n * sxy - sx * sy) / den;
}

SymTensor random_sym_tensor(std::mt19937_64& rng, double scale)
{
    std::normal_distribution<double> normal;
    Matrix5d a;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) {
            a(i, j) = normal(rng);
        }
    }
    return SymTensor(Matrix5d(0.5 * scale * (a + a.transpose())));
}

namespace {

Direction draw_direction(const TorusGalerkin& g, DirectionFamily family, std::mt19937_64& rng)
{
    switch (family) {
    case DirectionFamily::constant:
        return Direction::constant(random_sym_tensor(rng));
    case DirectionFamily::conformal_constant: {
        std::normal_distribution<double> normal;
        return Direction::scaled_metric(g.metric(), normal(rng));
    }
    case DirectionFamily::constant_plus_low_frequency:
        break;
    }
    // h(x) = H_0 + 1/4 sum_i (cos(x_i) A_i + sin(x_i) B_i)
    const int radius = g.constant_metric() ? g.lattice().radius() + 1 : g.metric().grid_radius();
    const CollocationGrid grid = CollocationGrid::with_radius(radius);
    const Matrix5d h0 = random_sym_tensor(rng).real_matrix();
    std::array<Matrix5d, 5> ca;
    std::array<Matrix5d, 5> sa;
    for (int i = 0; i < 5; ++i) {
        ca[static_cast<std::size_t>(i)] = random_sym_tensor(rng, 0.25).real_matrix();
        sa[static_cast<std::size_t>(i)] = random_sym_tensor(rng, 0.25).real_matrix();
    }
    std::vector<SymTensor> samples;
    samples.reserve(static_cast<std::size_t>(grid.size()));
    for (int p = 0; p < grid.size(); ++p) {
        const Vector5d x = grid.point(p);
        Matrix5d h = h0;
        for (int i = 0; i < 5; ++i) {
            h += std::cos(x(i)) * ca[static_cast<std::size_t>(i)] + std::sin(x(i)) * sa[static_cast<std::size_t>(i)];
        }
        samples.emplace_back(h);
    }
    return Direction::sampled(radius, std::move(samples));
}

} // namespace

SplittingSearch find_splitting_direction(const Galerkin& g, double lambda, const std::vector<FormField>& basis, int attempts,
                                         std::uint64_t seed, DirectionFamily family)
{
    if (basis.size() < 2) {
        throw ContractError("find_splitting_direction needs an eigenspace of dimension at least 2");
    }
    std::mt19937_64 rng(seed);
    SplittingSearch s;
    for (int a = 0; a < attempts; ++a) {
        Direction h = draw_direction(*g, family, rng);
        SplittingPrediction p = predict_splitting(g, h, lambda, basis);
        s.attempts = a + 1;
        s.spreads.push_back(p.spread());
        if (p.spread() > 1e-6 * std::abs(lambda)) {
            s.direction = std::move(h);
            s.prediction = std::move(p);
            break;
        }
    }
    return s;
}

nlohmann::json PerturbationReport::to_json() const
{
    return {{"schema_version", 1},
            {"lambda", lambda},
            {"m", m},
            {"predicted_slopes", predicted_slopes},
            {"measured_slopes", measured_slopes},
            {"max_deviation", max_deviation},
            {"residual_order", residual_order},
            {"eps_grid", eps_grid},
            {"seed", seed}};
}

PerturbationReport compare_splitting(const SplittingPrediction& prediction, const BranchTrace& trace, std::uint64_t seed)
{
    if (prediction.m != trace.m) {
        throw ContractError("prediction and trace disagree on the eigenspace dimension");
    }
    PerturbationReport r;
    r.lambda = prediction.lambda;
    r.m = prediction.m;
    r.seed = seed;
    r.eps_grid = trace.eps;
    for (int j = 0; j < r.m; ++j) {
        r.predicted_slopes.push_back(prediction.slopes(j));
        r.measured_slopes.push_back(trace.slopes(j));
        r.max_deviation = std::max(r.max_deviation, std::abs(prediction.slopes(j) - trace.slopes(j)));
    }
    r.residual_order = residual_order(trace, prediction.slopes);
    return r;
}

} // namespace hodge5
