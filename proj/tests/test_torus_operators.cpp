#include "hodge5/torus_operators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace hodge5;

namespace {

constexpr double kVolume = 32.0 * std::numbers::pi * std::numbers::pi * std::numbers::pi * std::numbers::pi *
                           std::numbers::pi;

const char* kFactor = "0.3*cos(x1) + 0.2*sin(x2+x3) - 0.15*cos(x4-x5) + 0.1*sin(x1+x5)";

Galerkin flat(int K = 1)
{
    return TorusGalerkin::create(MetricField::flat(), K);
}

Galerkin constant_random(std::uint64_t seed, int K = 1)
{
    std::mt19937_64 rng(seed);
    return TorusGalerkin::create(MetricField::constant(random_metric(rng)), K);
}

Galerkin conformal(int K = 1)
{
    return TorusGalerkin::create(MetricField::conformal(TrigPolynomial::parse(kFactor), default_grid_radius(K)), K);
}

std::vector<Galerkin> all_metrics()
{
    return {flat(), constant_random(4), conformal()};
}

double rel(const TorusGalerkin& g, const FormField& a, const FormField& b)
{
    return l2_norm(g, a - b) / std::max(l2_norm(g, b), 1e-300);
}

Mode mode(int a, int b = 0, int c = 0, int d = 0, int e = 0)
{
    Mode q;
    q << a, b, c, d, e;
    return q;
}

} // namespace

TEST(ExteriorD, Examples)
{
    const ModeLattice lat(1);
    const FormField c = FormField::single_mode(lat, Mode::Zero(), FormFiber::basis({2, 3}));
    EXPECT_TRUE(exterior_d(c).coeffs().isZero(0.0));
    const FormField u = FormField::single_mode(lat, mode(1), FormFiber::basis({2, 3}));
    const FormField du = exterior_d(u);
    const FormField expected = FormField::single_mode(lat, mode(1), FormFiber::basis({1, 2, 3})) * cdouble(0.0, 1.0);
    EXPECT_TRUE((du - expected).coeffs().isZero(0.0));
}

TEST(ExteriorD, SquaresToZeroAndPreservesReality)
{
    std::mt19937_64 rng(1);
    const ModeLattice lat(2);
    for (int k = 0; k <= 3; ++k) {
        const FormField u = FormField::random(lat, k, rng, k % 2 == 0);
        EXPECT_LT(exterior_d(exterior_d(u)).coeffs().norm(), 1e-13 * u.coeffs().norm());
        EXPECT_EQ(exterior_d(u).is_real(), u.is_real());
    }
    EXPECT_THROW(exterior_d(FormField::zero(lat, 5)), RankError);
}

TEST(HodgeStarField, ConstantExampleAndInvolution)
{
    const Galerkin g = flat();
    const FormField u = FormField::single_mode(g->lattice(), Mode::Zero(), FormFiber::basis({1, 2}));
    const FormField s = hodge_star_field(*g, u);
    EXPECT_TRUE((s - FormField::single_mode(g->lattice(), Mode::Zero(), FormFiber::basis({3, 4, 5}))).coeffs().isZero(0.0));
    std::mt19937_64 rng(2);
    for (const Galerkin& m : all_metrics()) {
        for (int k = 0; k <= 5; ++k) {
            const FormField r = FormField::random(m->lattice(), k, rng, true);
            EXPECT_LT(rel(*m, hodge_star_field(*m, hodge_star_field(*m, r)), r), 1e-12) << k;
        }
    }
}

TEST(HodgeStarField, ConformalMatchesDirectQuadrature)
{
    // e^{2f} identity: the 2-form star multiplies by e^{f} and dualizes.
    const TrigPolynomial f = TrigPolynomial::parse("cos(x1)");
    const int kg = 2;
    const Galerkin g = TorusGalerkin::create(MetricField::conformal(f, kg), 1);
    const Mode q = mode(1, 0, -1, 0, 0);
    const FormField u = FormField::single_mode(g->lattice(), q, FormFiber::basis({1, 2}));
    const FormField s = hodge_star_field(*g, u);
    const CollocationGrid grid = CollocationGrid::with_radius(kg);
    const int e345 = IndexBasis::of(3).position(std::array<int, 3>{2, 3, 4});
    double worst = 0.0;
    for (int m = 0; m < g->lattice().size(); ++m) {
        const Mode p = g->lattice().mode(m);
        cdouble c = 0.0;
        for (int x = 0; x < grid.size(); ++x) {
            const Vector5d pt = grid.point(x);
            c += std::exp(f(pt)) * std::exp(cdouble(0.0, (q - p).cast<double>().dot(pt)));
        }
        c /= static_cast<double>(grid.size());
        for (int i = 0; i < 10; ++i) {
            const cdouble expected = i == e345 ? c : 0.0;
            worst = std::max(worst, std::abs(s.block(m)(i) - expected));
        }
    }
    EXPECT_LT(worst, 1e-10);
}

TEST(Beltrami, NegatedSquareIsLaplacianOnCoexact)
{
    std::mt19937_64 rng(3);
    for (const Galerkin& g : all_metrics()) {
        const OperatorHandle b = beltrami(g);
        const OperatorHandle lap = hodge_laplacian(g, 2);
        for (bool real : {true, false}) {
            const FormField w = random_coexact(g, rng, real);
            EXPECT_LT(rel(*g, -1.0 * b(b(w)), lap(w)), 1e-10);
        }
    }
}

TEST(Beltrami, ConstantMetricIsModeDiagonal)
{
    const Galerkin g = constant_random(5);
    const Mode q = mode(1, -1, 0, 1, 0);
    std::mt19937_64 rng(4);
    Eigen::VectorXcd fiber = Eigen::VectorXcd::Random(10);
    const FormField u = FormField::single_mode(g->lattice(), q, FormFiber(2, fiber));
    const FormField bu = beltrami(g)(u);
    const int at = g->lattice().index(q);
    for (int m = 0; m < g->lattice().size(); ++m) {
        if (m != at) {
            EXPECT_TRUE(bu.block(m).isZero(0.0));
        }
    }
}

TEST(Beltrami, SkewAndLaplacianSymmetric)
{
    for (const Galerkin& g : all_metrics()) {
        EXPECT_LT(symmetry_defect(beltrami(g), 20, 7), 1e-10);
        EXPECT_LT(symmetry_defect(hodge_laplacian(g, 2), 10, 7), 1e-10);
        EXPECT_EQ(beltrami(g).symmetry, SymmetryClass::skew);
    }
}

TEST(BeltramiFiber, FlatUnitMode)
{
    const BeltramiFiber f = beltrami_fiber(MetricTensor::identity(), mode(1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.a);
    Eigen::VectorXd expected(6);
    expected << -1, -1, -1, 1, 1, 1;
    EXPECT_LT((es.eigenvalues() - expected).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_THROW(beltrami_fiber(MetricTensor::identity(), Mode::Zero()), DegenerateError);
}

TEST(BeltramiFiber, BruteForceAssemblyAndSquare)
{
    std::mt19937_64 rng(8);
    Vector5d diag;
    diag << 1, 2, 3, 4, 5;
    const std::vector<MetricTensor> metrics{MetricTensor::identity(), MetricTensor(Matrix5d(diag.asDiagonal())),
                                            random_metric(rng)};
    for (const MetricTensor& g : metrics) {
        for (const Mode& q : {mode(1), mode(1, 1), mode(2, -1, 0, 1, 1)}) {
            const BeltramiFiber f = beltrami_fiber(g, q);
            EXPECT_LT((f.a - f.a.transpose()).norm(), 1e-12);
            // B_q = *_g (i q ^ .) assembled directly on the 10-dim fiber.
            const Eigen::MatrixXcd bq = cdouble(0.0, 1.0) * (hodge_star_matrix(g, 3) * covector_wedge_matrix(q.cast<double>(), 2))
                                                               .cast<cdouble>();
            const Eigen::MatrixXcd lhs = bq * f.basis.cast<cdouble>();
            const Eigen::MatrixXcd rhs = cdouble(0.0, 1.0) * (f.basis * f.a).cast<cdouble>();
            EXPECT_LT((lhs - rhs).norm(), 1e-12 * (1.0 + lhs.norm()));
            const Eigen::MatrixXd mass = fiber_mass_matrix(g, 2);
            EXPECT_LT((f.basis.transpose() * mass * f.basis - Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-12);
            const double q2 = q.cast<double>().dot(g.inverse() * q.cast<double>());
            EXPECT_LT((f.a * f.a - q2 * Eigen::MatrixXd::Identity(6, 6)).norm(), 1e-11);
        }
    }
}

TEST(BeltramiFiber, DiagonalMetricFixture)
{
    // Values recorded from the dense 10x10 assembly; each has multiplicity 3.
    Vector5d diag;
    diag << 1, 2, 3, 4, 5;
    const BeltramiFiber f = beltrami_fiber(MetricTensor(Matrix5d(diag.asDiagonal())), mode(1, 1));
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(f.a).eigenvalues();
    const double r = std::sqrt(1.5);
    for (int i = 0; i < 6; ++i) {
        EXPECT_NEAR(ev(i), i < 3 ? -r : r, 1e-12);
    }
}

TEST(HodgeLaplacian, FlatAndHarmonic)
{
    const Galerkin g = flat();
    const Mode q = mode(1, 1, 0, -1, 0);
    const Eigen::VectorXcd fiber = Eigen::VectorXcd::Random(10);
    const FormField u = FormField::single_mode(g->lattice(), q, FormFiber(2, fiber));
    EXPECT_LT(rel(*g, hodge_laplacian(g, 2)(u), 3.0 * u), 1e-14);
    const FormField c = FormField::single_mode(g->lattice(), Mode::Zero(), FormFiber(2, fiber));
    EXPECT_LT(hodge_laplacian(g, 2)(c).coeffs().norm(), 1e-14);
}

TEST(Codifferential, SignFormulaAdjointnessAndSquare)
{
    std::mt19937_64 rng(9);
    for (const Galerkin& g : all_metrics()) {
        for (int k = 1; k <= 5; ++k) {
            const FormField u = FormField::random(g->lattice(), k - 1, rng);
            const FormField v = FormField::random(g->lattice(), k, rng);
            const cdouble lhs = l2_inner(*g, exterior_d(u), v);
            const cdouble rhs = l2_inner(*g, u, codifferential(*g, v));
            EXPECT_LT(std::abs(lhs - rhs), 1e-10 * l2_norm(*g, exterior_d(u)) * l2_norm(*g, v)) << k;
            FormField sds = hodge_star_field(*g, exterior_d(hodge_star_field(*g, v)));
            sds *= static_cast<double>(codifferential_sign(5, k));
            EXPECT_LT(rel(*g, codifferential(*g, v), sds), 1e-10) << k;
            if (k >= 2) {
                EXPECT_LT(l2_norm(*g, codifferential(*g, codifferential(*g, v))), 1e-10 * l2_norm(*g, v));
            }
        }
    }
}

TEST(HodgeLaplacian, CommutesWithDForConstantMetric)
{
    std::mt19937_64 rng(10);
    const Galerkin g = constant_random(11);
    const FormField u = FormField::random(g->lattice(), 2, rng);
    const FormField a = hodge_laplacian(g, 3)(exterior_d(u));
    const FormField b = exterior_d(hodge_laplacian(g, 2)(u));
    EXPECT_LT(rel(*g, a, b), 1e-10);
}

TEST(Projectors, DecompositionIdentities)
{
    std::mt19937_64 rng(12);
    for (const Galerkin& g : all_metrics()) {
        const HodgeProjectors p = hodge_projectors(g, 2);
        const std::array<const OperatorHandle*, 3> ps{&p.harmonic, &p.exact, &p.coexact};
        const FormField u = FormField::random(g->lattice(), 2, rng);
        const double nu = l2_norm(*g, u);
        FormField sum = FormField::zero(g->lattice(), 2);
        for (int a = 0; a < 3; ++a) {
            const FormField pa = (*ps[a])(u);
            sum += pa;
            EXPECT_LT(l2_norm(*g, (*ps[a])(pa) - pa), 1e-9 * nu);
            for (int b = 0; b < 3; ++b) {
                if (b != a) {
                    EXPECT_LT(l2_norm(*g, (*ps[b])(pa)), 1e-9 * nu);
                    EXPECT_LT(std::abs(l2_inner(*g, pa, (*ps[b])(u))), 1e-9 * nu * nu);
                }
            }
        }
        EXPECT_LT(l2_norm(*g, sum - u), 1e-9 * nu);
        const FormField alpha = FormField::random(g->lattice(), 1, rng);
        EXPECT_LT(l2_norm(*g, p.coexact(exterior_d(alpha))), 1e-9 * l2_norm(*g, exterior_d(alpha)));
        // B keeps co-exact fields co-exact.
        const FormField w = p.coexact(u);
        EXPECT_LT(l2_norm(*g, p.exact(beltrami(g)(w))), 1e-10 * l2_norm(*g, beltrami(g)(w)));
    }
}

TEST(Projectors, ConstantHarmonicDimensionIsTen)
{
    const Galerkin g = constant_random(13);
    const HodgeProjectors p = hodge_projectors(g, 2);
    std::mt19937_64 rng(14);
    Eigen::MatrixXcd cols(g->dimension(2), 14);
    for (int i = 0; i < 14; ++i) {
        cols.col(i) = p.harmonic(FormField::random(g->lattice(), 2, rng)).coeffs();
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(cols);
    const Eigen::VectorXd s = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < s.size(); ++i) {
        rank += s(i) > 1e-8 * s(0);
    }
    EXPECT_EQ(rank, 10);
}

TEST(GaugeUnitary, IdentityAndConformalMultiplier)
{
    const TrigPolynomial f = TrigPolynomial::parse("0.2*cos(x1) + 0.1*sin(x2-x3)");
    const MetricField g = MetricField::conformal(TrigPolynomial::parse("0.1*cos(x4)"), 2);
    for (double m : gauge_multiplier(g, g)) {
        EXPECT_NEAR(m, 1.0, 1e-14);
    }
    // e^{2f} g has determinant e^{10 f} det g.
    std::vector<Matrix5d> scaled;
    const CollocationGrid grid = g.grid();
    for (int p = 0; p < grid.size(); ++p) {
        scaled.push_back(std::exp(2.0 * f(grid.point(p))) * g.at(p).matrix());
    }
    const MetricField ge = MetricField::sampled(2, scaled);
    const std::vector<double> mult = gauge_multiplier(g, ge);
    for (int p = 0; p < grid.size(); p += 7) {
        EXPECT_NEAR(mult[static_cast<std::size_t>(p)], std::exp(-2.5 * f(grid.point(p))), 1e-13);
    }
    // |U u|^2 in the fiber pairing of g times the measure of g_eps equals |u|^2 under g.
    std::mt19937_64 rng(15);
    std::normal_distribution<double> n;
    double before = 0.0, after = 0.0;
    for (int p = 0; p < grid.size(); ++p) {
        Eigen::VectorXd u(10);
        for (int i = 0; i < 10; ++i) {
            u(i) = n(rng);
        }
        const Eigen::MatrixXd c = fiber_metric_matrix(g.at(p), 2);
        const double m = mult[static_cast<std::size_t>(p)];
        before += u.dot(c * u) * g.at(p).sqrt_determinant();
        after += m * m * u.dot(c * u) * ge.at(p).sqrt_determinant();
    }
    EXPECT_NEAR(after / before, 1.0, 1e-10);
    const Galerkin gg = TorusGalerkin::create(g, 1);
    const FormField u = FormField::random(gg->lattice(), 2, rng);
    EXPECT_LT(rel(*gg, gauge_unitary(gg, g)(u), u), 1e-13);
}

TEST(L2Inner, FlatExamples)
{
    const Galerkin g = flat();
    const FormField a = FormField::single_mode(g->lattice(), mode(1), FormFiber::basis({1, 2}));
    const FormField b = FormField::single_mode(g->lattice(), mode(0, 1), FormFiber::basis({1, 2}));
    EXPECT_EQ(l2_inner(*g, a, b), cdouble(0.0));
    EXPECT_NEAR(std::abs(l2_inner(*g, a, a) - kVolume), 0.0, 1e-9);
    std::mt19937_64 rng(16);
    for (const Galerkin& m : all_metrics()) {
        const FormField u = FormField::random(m->lattice(), 2, rng);
        const FormField v = FormField::random(m->lattice(), 2, rng);
        EXPECT_LT(std::abs(l2_inner(*m, u, v) - std::conj(l2_inner(*m, v, u))), 1e-10 * l2_norm(*m, u) * l2_norm(*m, v));
        EXPECT_NEAR(std::abs(l2_inner(*m, u, v) - l2_inner(m->metric(), u, v)), 0.0,
                    1e-10 * l2_norm(*m, u) * l2_norm(*m, v));
    }
}

TEST(TorusGalerkin, RejectsUnderResolvedMetricGrid)
{
    const MetricField g = MetricField::conformal(TrigPolynomial::parse("0.1*cos(x1)"), 1);
    EXPECT_THROW(TorusGalerkin(g, 2), ConfigurationError);
}
