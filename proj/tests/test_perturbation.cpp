#include "hodge5/perturbation.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hodge5;

namespace {

const char* kFactor = "0.3*cos(x1) + 0.2*sin(x2+x3) - 0.15*cos(x4-x5) + 0.1*sin(x1+x5) + 0.12*sin(x2+x4)";

Eigen::VectorXcd random_fiber(std::mt19937_64& rng, int n = 10)
{
    std::normal_distribution<double> d;
    Eigen::VectorXcd c(n);
    for (int i = 0; i < n; ++i) {
        const double re = d(rng);
        c(i) = cdouble(re, d(rng));
    }
    return c;
}

Galerkin conformal()
{
    return TorusGalerkin::create(MetricField::conformal(TrigPolynomial::parse(kFactor), 2), 1);
}

/// Low-frequency symmetric direction sampled on the grid of radius kg.
Direction wavy_direction(int kg, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const SymTensor a = random_sym_tensor(rng, 0.3);
    const SymTensor b = random_sym_tensor(rng, 0.3);
    const SymTensor c = random_sym_tensor(rng, 0.3);
    const CollocationGrid grid = CollocationGrid::with_radius(kg);
    std::vector<SymTensor> s;
    for (int p = 0; p < grid.size(); ++p) {
        const Vector5d x = grid.point(p);
        s.emplace_back(Matrix5d(a.real_matrix() + std::cos(x(0) - x(2)) * b.real_matrix() + std::sin(x(3)) * c.real_matrix()));
    }
    return Direction::sampled(kg, std::move(s));
}

struct Eig {
    double lambda;
    FormField u;
};

Eig lowest_positive(const Galerkin& g)
{
    SpectrumOptions o;
    o.count = 4;
    for (const auto& p : compute_spectrum(beltrami(g), DomainRestriction::coexact, o).pairs) {
        if (p.value > 0) {
            return {p.value, p.vector};
        }
    }
    throw std::runtime_error("no positive eigenvalue");
}

FormField beltrami_at(const MetricField& g, int K, const FormField& u)
{
    return beltrami(TorusGalerkin::create(g, K))(u);
}

} // namespace

TEST(SForm, MatchesIndexFormula)
{
    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        const MetricTensor g = random_metric(rng);
        const SymTensor h = random_sym_tensor(rng);
        const FormFiber w(2, random_fiber(rng));
        const Matrix5cd ref = oracle::s_form(g.matrix(), h.matrix(), two_form_matrix(w.coeffs));
        EXPECT_LT((two_form_matrix(s_form(g, h, w).coeffs) - ref).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((s_form_matrix(g, h) * w.coeffs - s_form(g, h, w).coeffs).norm(), 1e-12);
    }
}

TEST(SForm, MetricDirectionZeroAndLinearity)
{
    std::mt19937_64 rng(2);
    const MetricTensor g = random_metric(rng);
    const FormFiber w(2, random_fiber(rng));
    EXPECT_LT((s_form(g, SymTensor(g.matrix()), w).coeffs + 0.5 * w.coeffs).norm(), 1e-12);
    EXPECT_TRUE(s_form(g, SymTensor(), w).coeffs.isZero(0.0));
    const SymTensor h1 = random_sym_tensor(rng);
    const SymTensor h2 = random_sym_tensor(rng);
    const double a = 0.7;
    const Eigen::VectorXcd lhs = s_form(g, SymTensor(Matrix5d(a * h1.real_matrix() + h2.real_matrix())), w).coeffs;
    const Eigen::VectorXcd rhs = a * s_form(g, h1, w).coeffs + s_form(g, h2, w).coeffs;
    EXPECT_LT((lhs - rhs).norm(), 1e-12);
}

TEST(TracelessShift, Identities)
{
    std::mt19937_64 rng(3);
    const MetricTensor g = random_metric(rng);
    const MetricField gf = MetricField::constant(g);
    const Direction hg = traceless_shift(gf, Direction::constant(SymTensor(g.matrix())));
    EXPECT_LT((hg.constant_value().matrix() + 4.0 * g.matrix().cast<cdouble>()).norm(), 1e-12);
    for (int t = 0; t < 5; ++t) {
        const SymTensor tt = random_sym_tensor(rng);
        const Direction ht = traceless_shift(gf, Direction::constant(tt));
        EXPECT_LT(std::abs(trace(g, ht.constant_value()) + 4.0 * trace(g, tt)), 1e-12);
        const FormFiber u(2, random_fiber(rng));
        EXPECT_LT((s_form(g, ht.constant_value(), u).coeffs - traceless_s_form(g, tt, u).coeffs).cwiseAbs().maxCoeff(),
                  1e-12);
    }
}

TEST(MetricDerivative, Identities)
{
    std::mt19937_64 rng(4);
    const MetricTensor g = random_metric(rng);
    const MetricDerivativeReport self = metric_derivative_identities(g, SymTensor(g.matrix()));
    EXPECT_NEAR(self.det_log_derivative, 5.0, 1e-7);
    const MetricDerivativeReport zero = metric_derivative_identities(g, SymTensor());
    EXPECT_EQ(zero.inverse_fd.norm(), 0.0);
    EXPECT_EQ(zero.sqrt_det_fd, 0.0);
    for (int t = 0; t < 5; ++t) {
        const MetricDerivativeReport r = metric_derivative_identities(g, random_sym_tensor(rng, 0.5));
        EXPECT_LT(r.inverse_error, 1e-7);
        EXPECT_LT(r.sqrt_det_error, 1e-7);
    }
    Matrix5d big = -10.0 * Matrix5d::Identity();
    EXPECT_THROW(metric_derivative_identities(g, SymTensor(big), 1.0), MetricError);
}

TEST(DBeltrami, ZeroAndMetricDirection)
{
    const Galerkin g = conformal();
    const Eig e = lowest_positive(g);
    const FormField z = d_beltrami(g, Direction::constant(SymTensor()), e.u, e.lambda);
    EXPECT_LT(z.coeffs().norm(), 1e-14);
    const FormField c = d_beltrami(g, Direction::scaled_metric(g->metric(), 1.0), e.u, e.lambda);
    const FormField expected = cdouble(0.0, -0.5 * e.lambda) * e.u;
    EXPECT_LT(l2_norm(*g, c - expected), 1e-10);
    EXPECT_THROW(d_beltrami(g, Direction::constant(SymTensor()), e.u, e.lambda + 0.1), ContractError);
}

TEST(DBeltrami, MatchesRichardsonFiniteDifferences)
{
    const Galerkin g = conformal();
    const Eig e = lowest_positive(g);
    std::mt19937_64 rng(5);
    const std::vector<Direction> directions{Direction::constant(random_sym_tensor(rng, 0.5)), wavy_direction(2, 6)};
    for (const Direction& h : directions) {
        auto central = [&](double eps) {
            return (beltrami_at(perturb(g->metric(), h, eps), 1, e.u) - beltrami_at(perturb(g->metric(), h, -eps), 1, e.u)) *
                   cdouble(0.5 / eps);
        };
        const double eps = 2e-3;
        const FormField rich = (central(eps / 2) * cdouble(4.0) - central(eps)) * cdouble(1.0 / 3.0);
        const FormField exact = d_beltrami(g, h, e.u, e.lambda);
        EXPECT_LT(l2_norm(*g, rich - exact) / l2_norm(*g, exact), 1e-6);
        const FormField s = cdouble(0.0, e.lambda) * s_form(g, h, e.u);
        EXPECT_LT(l2_norm(*g, s - exact) / l2_norm(*g, exact), 1e-10);
    }
}

TEST(PredictSplitting, ConformalControlAndSumRule)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const Eigenspace es = beltrami_eigenspace(g, 1.0);
    ASSERT_EQ(es.basis.size(), 30u);
    const SplittingPrediction c = predict_splitting(g, Direction::scaled_metric(g->metric(), 1.0), 1.0, es.basis);
    EXPECT_LT((c.slopes.array() + 0.5).abs().maxCoeff(), 1e-9);
    EXPECT_LT(c.spread(), 1e-9);
    std::mt19937_64 rng(7);
    const Direction h = Direction::constant(random_sym_tensor(rng));
    const SplittingPrediction p = predict_splitting(g, h, 1.0, es.basis);
    EXPECT_LT(p.hermitian_defect, 1e-9);
    EXPECT_NEAR(p.slopes.sum(), p.matrix.trace().real(), 1e-9);
    // Flat metric, constant h: the mode +-e_j moves with slope -h_jj/2.
    std::vector<double> expected;
    for (int j = 0; j < 5; ++j) {
        for (int r = 0; r < 6; ++r) {
            expected.push_back(-0.5 * h.constant_value().real_matrix()(j, j));
        }
    }
    std::sort(expected.begin(), expected.end());
    for (int i = 0; i < 30; ++i) {
        EXPECT_NEAR(p.slopes(i), expected[static_cast<std::size_t>(i)], 1e-10);
    }
    // Rotated basis gives the same slopes.
    EXPECT_EQ(p.adapted_basis.size(), 30u);
    const SplittingPrediction q = predict_splitting(g, h, 1.0, p.adapted_basis);
    EXPECT_LT((q.slopes - p.slopes).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((q.matrix - Eigen::MatrixXcd(p.slopes.cast<cdouble>().asDiagonal())).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(PredictSplitting, SingleEigenfield)
{
    const Galerkin g = conformal();
    const Eig e = lowest_positive(g);
    std::mt19937_64 rng(8);
    const Direction h = Direction::constant(random_sym_tensor(rng));
    const SplittingPrediction p = predict_splitting(g, h, e.lambda, {e.u});
    ASSERT_EQ(p.m, 1);
    const cdouble direct = e.lambda * s_pairing(g, h, e.u, e.u);
    EXPECT_NEAR(p.slopes(0), direct.real(), 1e-12);
    EXPECT_THROW(predict_splitting(g, h, e.lambda, {cdouble(2.0) * e.u}), ContractError);
    EXPECT_THROW(find_splitting_direction(g, e.lambda, {e.u}, 3, 1), ContractError);
}

TEST(TraceBranches, FlatShellMatchesPrediction)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const Eigenspace es = beltrami_eigenspace(g, 1.0);
    std::mt19937_64 rng(9);
    const Direction h = Direction::constant(random_sym_tensor(rng));
    const SplittingPrediction p = predict_splitting(g, h, 1.0, es.basis);
    const BranchTrace t = trace_branches(g, h, 1.0);
    EXPECT_EQ(t.m, 30);
    for (const auto& row : t.branches) {
        EXPECT_EQ(row.size(), 30u);
    }
    EXPECT_LT((t.slopes - p.slopes).cwiseAbs().maxCoeff(), 1e-5);
    const double order = residual_order(t, p.slopes);
    EXPECT_GE(order, 1.9);
    EXPECT_LE(order, 2.1);
    const PerturbationReport rep = compare_splitting(p, t, 9);
    EXPECT_LT(rep.max_deviation, 1e-5);
    const auto j = rep.to_json();
    for (const char* key : {"lambda", "m", "predicted_slopes", "measured_slopes", "max_deviation", "eps_grid", "seed"}) {
        EXPECT_TRUE(j.contains(key)) << key;
    }
}

TEST(TraceBranches, ZeroDirectionAndGapErrors)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const BranchTrace t = trace_branches(g, Direction::constant(SymTensor()), 1.0);
    for (const auto& row : t.branches) {
        for (double v : row) {
            EXPECT_NEAR(v, 1.0, 1e-12);
        }
    }
    BranchOptions wide;
    wide.gap = 1.0;
    std::mt19937_64 rng(10);
    EXPECT_THROW(trace_branches(g, Direction::constant(random_sym_tensor(rng)), 1.0, wide), GapTooSmallError);
    BranchOptions huge;
    huge.eps_grid = {-5.0, -4.0, 4.0, 5.0};
    EXPECT_THROW(trace_branches(g, Direction::constant(SymTensor(Matrix5d(Matrix5d::Identity()))), 1.0, huge), MetricError);
}

TEST(FindSplittingDirection, FlatShellAndConformalControl)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const Eigenspace es = beltrami_eigenspace(g, 1.0);
    const SplittingSearch s = find_splitting_direction(g, 1.0, es.basis, 5, 11, DirectionFamily::constant);
    EXPECT_TRUE(s.found());
    EXPECT_EQ(s.attempts, 1);
    const SplittingSearch c = find_splitting_direction(g, 1.0, es.basis, 4, 11, DirectionFamily::conformal_constant);
    EXPECT_FALSE(c.found());
    EXPECT_EQ(c.spreads.size(), 4u);
    for (double sp : c.spreads) {
        EXPECT_LE(sp, 1e-12);
    }
    const SplittingSearch w = find_splitting_direction(g, 1.0, es.basis, 2, 11);
    EXPECT_TRUE(w.found());
    EXPECT_FALSE(w.direction->is_constant());
}
