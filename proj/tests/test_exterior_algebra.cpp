#include "hodge5/exterior_algebra.hpp"
#include "hodge5/fields.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hodge5;

namespace {

Matrix5d random_spd(std::mt19937_64& rng)
{
    return random_metric(rng).matrix();
}

Eigen::VectorXcd random_coeffs(int k, std::mt19937_64& rng)
{
    std::normal_distribution<double> n;
    Eigen::VectorXcd c(form_dimension(k));
    for (long i = 0; i < c.size(); ++i) {
        const double re = n(rng);
        c(i) = cdouble(re, n(rng));
    }
    return c;
}

} // namespace

TEST(IndexBasis, MatchesFilteredEnumeration)
{
    for (int k = 0; k <= 5; ++k) {
        const IndexBasis& b = IndexBasis::of(k);
        const auto expected = oracle::increasing_tuples(k);
        ASSERT_EQ(b.size(), oracle::binomial(5, k));
        ASSERT_EQ(static_cast<std::size_t>(b.size()), expected.size());
        for (int p = 0; p < b.size(); ++p) {
            const auto t = b.tuple(p);
            EXPECT_EQ(std::vector<int>(t.begin(), t.end()), expected[static_cast<std::size_t>(p)]);
            EXPECT_EQ(b.position(t), p);
        }
    }
    const std::array<int, 2> unsorted{2, 1};
    EXPECT_EQ(IndexBasis::of(2).position(unsorted), -1);
}

TEST(PermutationSign, AgreesWithInversionCount)
{
    for (int k = 0; k <= 5; ++k) {
        for (long f = 0; f < oracle::power5(k); ++f) {
            const auto t = oracle::tuple_of(f, k);
            EXPECT_EQ(permutation_sign(t), oracle::inversion_sign(t));
        }
    }
    EXPECT_EQ(perm_sign({1, 2, 3, 4, 5}), 1);
    EXPECT_EQ(perm_sign({2, 1, 3, 4, 5}), -1);
    EXPECT_EQ(perm_sign({1, 1, 3, 4, 5}), 0);
}

TEST(MetricTensor, RejectsNonSpd)
{
    Matrix5d g = Matrix5d::Identity();
    g(4, 4) = -1.0;
    EXPECT_THROW(MetricTensor{g}, MetricError);
    Matrix5d a = Matrix5d::Identity();
    a(0, 1) = 0.5;
    EXPECT_THROW(MetricTensor{a}, MetricError);
    Matrix5d tiny = Matrix5d::Identity();
    tiny(2, 2) = 1e-12;
    EXPECT_THROW(MetricTensor{tiny}, MetricError);
}

TEST(CompoundMatrix, CauchyBinetAndMinors)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    Matrix5d a, b;
    for (int i = 0; i < 25; ++i) {
        a(i) = n(rng);
        b(i) = n(rng);
    }
    for (int k = 0; k <= 5; ++k) {
        const Eigen::MatrixXd cab = compound_matrix(Matrix5d(a * b), k);
        const Eigen::MatrixXd prod = compound_matrix(a, k) * compound_matrix(b, k);
        EXPECT_LT((cab - prod).norm(), 1e-10 * (1.0 + cab.norm()));
    }
    const Eigen::MatrixXd c2 = compound_matrix(a, 2);
    // Row {0,1}, column {1,3} is the 2x2 minor a01 a13 ... written out.
    const int row = IndexBasis::of(2).position(std::array<int, 2>{0, 1});
    const int col = IndexBasis::of(2).position(std::array<int, 2>{1, 3});
    EXPECT_NEAR(c2(row, col), a(0, 1) * a(1, 3) - a(0, 3) * a(1, 1), 1e-14);
    EXPECT_NEAR(compound_matrix(a, 5)(0, 0), a.determinant(), 1e-12);
}

TEST(Duality, IsSignedPermutation)
{
    for (int k = 0; k <= 5; ++k) {
        const Eigen::MatrixXd& e = duality_matrix(k);
        EXPECT_TRUE((e.transpose() * e).isIdentity(0.0));
        EXPECT_TRUE(e.transpose() == duality_matrix(5 - k));
    }
}

TEST(Wedge, BasisExamples)
{
    const FormFiber e12 = wedge(FormFiber::basis({1}), FormFiber::basis({2}));
    EXPECT_EQ(e12.rank, 2);
    EXPECT_TRUE(e12.coeffs.isApprox(FormFiber::basis({1, 2}).coeffs));
    EXPECT_TRUE(wedge(e12, e12).coeffs.isZero(0.0));
    const FormFiber vol = wedge(e12, FormFiber::basis({3, 4, 5}));
    EXPECT_EQ(vol.rank, 5);
    EXPECT_EQ(vol.coeffs(0), cdouble(1.0));
    EXPECT_THROW(wedge(e12, FormFiber::basis({1, 2, 3, 4})), RankError);
}

TEST(Wedge, GradedCommutativeAndAssociative)
{
    std::mt19937_64 rng(5);
    for (int p = 0; p <= 3; ++p) {
        for (int q = 0; p + q <= 5; ++q) {
            const FormFiber u(p, random_coeffs(p, rng));
            const FormFiber v(q, random_coeffs(q, rng));
            const double s = (p * q) % 2 ? -1.0 : 1.0;
            EXPECT_LT((wedge(u, v).coeffs - s * wedge(v, u).coeffs).norm(), 1e-13);
        }
    }
    for (int a = 1; a <= 5; ++a) {
        for (int b = 1; b <= 5; ++b) {
            const FormFiber ea = FormFiber::basis({a});
            const FormFiber eb = FormFiber::basis({b});
            EXPECT_TRUE((wedge(ea, eb).coeffs + wedge(eb, ea).coeffs).isZero(0.0));
        }
    }
    const FormFiber x(1, random_coeffs(1, rng));
    const FormFiber y(2, random_coeffs(2, rng));
    const FormFiber z(2, random_coeffs(2, rng));
    EXPECT_LT((wedge(wedge(x, y), z).coeffs - wedge(x, wedge(y, z)).coeffs).norm(), 1e-12);
}

TEST(Wedge, CovectorMatrixMatchesWedge)
{
    std::mt19937_64 rng(6);
    Vector5d q;
    q << 1.0, -2.0, 0.5, 3.0, 0.0;
    const FormFiber qf(1, q.cast<cdouble>());
    for (int k = 0; k <= 4; ++k) {
        const FormFiber u(k, random_coeffs(k, rng));
        const Eigen::VectorXcd lhs = covector_wedge_matrix(q, k).cast<cdouble>() * u.coeffs;
        EXPECT_LT((lhs - wedge(qf, u).coeffs).norm(), 1e-13);
    }
}

TEST(HodgeStar, Examples)
{
    const FormFiber s = hodge_star(MetricTensor::identity(), FormFiber::basis({1, 2}));
    EXPECT_TRUE(s.coeffs.isApprox(FormFiber::basis({3, 4, 5}).coeffs));
    Vector5d a;
    a << 1.0, 2.0, 3.0, 4.0, 5.0;
    const FormFiber d = hodge_star(MetricTensor(Matrix5d(a.asDiagonal())), FormFiber::basis({1, 2}));
    const Eigen::VectorXcd e345 = FormFiber::basis({3, 4, 5}).coeffs * (std::sqrt(120.0) / 2.0);
    EXPECT_LT((d.coeffs - e345).norm(), 1e-13);
}

TEST(HodgeStar, MatchesFullSumFormulaAndIsInvolution)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const Matrix5d gm = random_spd(rng);
        const MetricTensor g(gm);
        for (int k = 0; k <= 5; ++k) {
            const FormFiber u(k, random_coeffs(k, rng));
            const FormFiber s = hodge_star(g, u);
            const Eigen::VectorXcd ref = oracle::hodge_star(gm, u.coeffs, k);
            EXPECT_LT((s.coeffs - ref).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + ref.cwiseAbs().maxCoeff())) << "k=" << k;
            EXPECT_LT((hodge_star(g, s).coeffs - u.coeffs).cwiseAbs().maxCoeff(), 1e-12) << "k=" << k;
        }
    }
}

TEST(HodgeStar, DefinesInnerProductThroughWedge)
{
    std::mt19937_64 rng(8);
    const MetricTensor g(random_spd(rng));
    for (int k = 0; k <= 5; ++k) {
        const FormFiber u(k, random_coeffs(k, rng));
        const FormFiber v(k, random_coeffs(k, rng));
        FormFiber sv = hodge_star(g, v);
        sv.coeffs = sv.coeffs.conjugate().eval();
        const cdouble lhs = wedge(u, sv).coeffs(0);
        EXPECT_LT(std::abs(lhs - fiber_inner(g, u, v, Measure::weighted)), 1e-12 * (1.0 + std::abs(lhs)));
    }
}

TEST(FiberInner, ExamplesAndPositivity)
{
    const MetricTensor id = MetricTensor::identity();
    EXPECT_EQ(fiber_inner(id, FormFiber::basis({1, 2}), FormFiber::basis({1, 2})), cdouble(1.0));
    EXPECT_EQ(fiber_inner(id, FormFiber::basis({1, 2}), FormFiber::basis({1, 3})), cdouble(0.0));
    Matrix5d d = Matrix5d::Identity();
    d(0, 0) = 2.0;
    EXPECT_NEAR(std::abs(fiber_inner(MetricTensor(d), FormFiber::basis({1, 2}), FormFiber::basis({1, 2})) - 0.5), 0.0,
                1e-15);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const MetricTensor g(random_spd(rng));
        const int k = trial % 6;
        const FormFiber u(k, random_coeffs(k, rng));
        const FormFiber v(k, random_coeffs(k, rng));
        const cdouble uu = fiber_inner(g, u, u);
        EXPECT_GT(uu.real(), 0.0);
        EXPECT_NEAR(uu.imag(), 0.0, 1e-12 * uu.real());
        EXPECT_LT(std::abs(fiber_inner(g, u, v) - std::conj(fiber_inner(g, v, u))), 1e-12);
    }
    EXPECT_EQ(fiber_inner(id, FormFiber::zero(2), FormFiber::zero(2)), cdouble(0.0));
    EXPECT_THROW(fiber_inner(id, FormFiber::basis({1}), FormFiber::basis({1, 2})), RankError);
}

TEST(Signs, TableAgainstExponent)
{
    for (int n = 1; n <= 7; ++n) {
        for (int k = 0; k <= n; ++k) {
            EXPECT_EQ(codifferential_sign(n, k), (n * (k + 1) + 1) % 2 ? -1 : 1);
            EXPECT_EQ(laplacian_sign(n, k), (n * k + 1) % 2 ? -1 : 1);
            // Both odd gives +1, any other parity -1.
            EXPECT_EQ(laplacian_sign(n, k), (n % 2 && k % 2) ? 1 : -1);
        }
    }
    EXPECT_EQ(codifferential_sign(5, 3), -1);
    EXPECT_EQ(codifferential_sign(3, 1), -1);
    EXPECT_EQ(codifferential_sign(5, 2), 1);
    EXPECT_EQ(laplacian_sign(5, 2), -1);
    EXPECT_EQ(laplacian_sign(3, 1), 1);
    EXPECT_EQ(laplacian_sign(5, 0), -1);
}

TEST(Trace, Examples)
{
    const SymTensor id(Matrix5d(Matrix5d::Identity()));
    EXPECT_NEAR(std::abs(trace(MetricTensor::identity(), id) - 5.0), 0.0, 1e-15);
    Vector5d a;
    a << 1.0, 2.0, 3.0, 4.0, 5.0;
    const MetricTensor g(Matrix5d(a.asDiagonal()));
    EXPECT_NEAR(std::abs(trace(g, id) - (1.0 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5)), 0.0, 1e-14);
    std::mt19937_64 rng(10);
    const MetricTensor r(random_spd(rng));
    EXPECT_NEAR(std::abs(trace(r, SymTensor(r.matrix())) - 5.0), 0.0, 1e-13);
}

TEST(TwoFormMatrix, RoundTripAndAntisymmetry)
{
    std::mt19937_64 rng(11);
    const Eigen::VectorXcd w = random_coeffs(2, rng);
    const Matrix5cd m = two_form_matrix(w);
    EXPECT_TRUE((m + m.transpose()).isZero(0.0));
    EXPECT_TRUE(two_form_coefficients(m).isApprox(w));
    const int p = IndexBasis::of(2).position(std::array<int, 2>{1, 3});
    EXPECT_EQ(m(1, 3), w(p));
}
