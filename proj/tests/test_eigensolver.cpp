#include "hodge5/eigensolver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace hodge5;

namespace {

const char* kFactor = "0.3*cos(x1) + 0.2*sin(x2+x3) - 0.15*cos(x4-x5) + 0.1*sin(x1+x5) + 0.12*sin(x2+x4)";

Galerkin conformal()
{
    return TorusGalerkin::create(MetricField::conformal(TrigPolynomial::parse(kFactor), 2), 1);
}

Galerkin random_constant(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return TorusGalerkin::create(MetricField::constant(random_metric(rng)), 1);
}

SpectrumOptions values_only(int count)
{
    SpectrumOptions o;
    o.count = count;
    o.vectors = false;
    return o;
}

} // namespace

TEST(Cluster, Examples)
{
    const SpectrumReport r = cluster({1.0, 1.0 + 1e-12, 2.0}, 1e-9);
    ASSERT_EQ(r.clusters.size(), 2u);
    EXPECT_EQ(r.clusters[0].multiplicity, 2);
    EXPECT_NEAR(r.clusters[0].value, 1.0, 1e-12);
    EXPECT_EQ(r.clusters[1].multiplicity, 1);
    EXPECT_TRUE(cluster({}, 1e-9).clusters.empty());
    const double tol = 1e-6;
    EXPECT_EQ(cluster({1.0, 1.0 + 2 * tol}, tol).clusters.size(), 2u);
    // Single linkage chains through small gaps.
    EXPECT_EQ(cluster({1.0, 1.0 + 0.8 * tol, 1.0 + 1.6 * tol}, tol).clusters.size(), 1u);
    EXPECT_EQ(cluster({3.0, 1.0, 2.0}, 0.1).total_multiplicity(), 3);
}

TEST(Spectrum, FlatLaplacianMatchesShellCount)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const SpectrumResult res = compute_spectrum(hodge_laplacian(g, 2), DomainRestriction::coexact, values_only(0));
    EXPECT_TRUE(res.complete);
    std::vector<double> values;
    for (const auto& p : res.pairs) {
        values.push_back(p.value);
    }
    const SpectrumReport rep = cluster(values, 1e-9);
    const auto expected = oracle::flat_coexact_multiplicities(1);
    ASSERT_EQ(rep.clusters.size(), expected.size());
    auto it = expected.begin();
    for (const auto& c : rep.clusters) {
        EXPECT_NEAR(c.value, it->first, 1e-9);
        EXPECT_EQ(c.multiplicity, it->second);
        ++it;
    }
    EXPECT_EQ(rep.clusters.front().multiplicity, 60);
}

TEST(Spectrum, FlatBeltramiIsPlusMinusNorm)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    const SpectrumResult res = compute_spectrum(beltrami(g), DomainRestriction::coexact, values_only(60));
    ASSERT_EQ(res.pairs.size(), 60u);
    int plus = 0;
    for (const auto& p : res.pairs) {
        EXPECT_NEAR(std::abs(p.value), 1.0, 1e-12);
        plus += p.value > 0;
    }
    EXPECT_EQ(plus, 30);
    EXPECT_NEAR(std::abs(*res.next_value), std::sqrt(2.0), 1e-12);
}

TEST(Spectrum, IdentityOperator)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 0);
    const auto pairs = spectrum(identity_operator(g, 2), DomainRestriction::full);
    ASSERT_EQ(pairs.size(), 10u);
    for (const auto& p : pairs) {
        EXPECT_NEAR(p.value, 1.0, 1e-13);
    }
}

TEST(Spectrum, VectorsAreNormalizedEigenfields)
{
    const Galerkin g = random_constant(21);
    SpectrumOptions o;
    o.count = 24;
    const SpectrumResult res = compute_spectrum(beltrami(g), DomainRestriction::coexact, o);
    ASSERT_EQ(res.method, "per-mode");
    for (const auto& p : res.pairs) {
        EXPECT_NEAR(l2_norm(*g, p.vector), 1.0, 1e-12);
        EXPECT_LT(beltrami_residual(*g, p.vector, p.value), 1e-10);
        // Largest coefficient real positive.
        Eigen::Index at;
        p.vector.coeffs().cwiseAbs().maxCoeff(&at);
        EXPECT_NEAR(p.vector.coeffs()(at).imag(), 0.0, 1e-14);
        EXPECT_GT(p.vector.coeffs()(at).real(), 0.0);
    }
}

TEST(Spectrum, ConformalBeltramiIsSymmetricAndSquaresToLaplacian)
{
    const Galerkin g = conformal();
    const SpectrumResult b = compute_spectrum(beltrami(g), DomainRestriction::coexact, values_only(16));
    const SpectrumResult l = compute_spectrum(hodge_laplacian(g, 2), DomainRestriction::coexact, values_only(16));
    EXPECT_EQ(b.method, "dense");
    std::vector<double> pos, neg, sq;
    for (const auto& p : b.pairs) {
        (p.value > 0 ? pos : neg).push_back(std::abs(p.value));
        sq.push_back(p.value * p.value);
    }
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    std::sort(sq.begin(), sq.end());
    ASSERT_EQ(pos.size(), neg.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        EXPECT_NEAR(pos[i], neg[i], 1e-9);
    }
    ASSERT_EQ(l.pairs.size(), sq.size());
    for (std::size_t i = 0; i < sq.size(); ++i) {
        EXPECT_NEAR(l.pairs[i].value, sq[i], 1e-9 * sq[i]);
        EXPECT_GT(l.pairs[i].value, 0.0);
    }
}

TEST(Spectrum, DenseMatchesPerModeOnSampledConstantMetric)
{
    std::mt19937_64 rng(22);
    const MetricTensor c = random_metric(rng);
    const Galerkin exact = TorusGalerkin::create(MetricField::constant(c), 1);
    const int n = CollocationGrid::with_radius(2).size();
    const Galerkin sampled =
        TorusGalerkin::create(MetricField::sampled(2, std::vector<Matrix5d>(static_cast<std::size_t>(n), c.matrix())), 1);
    const SpectrumResult a = compute_spectrum(beltrami(exact), DomainRestriction::coexact, values_only(24));
    const SpectrumResult b = compute_spectrum(beltrami(sampled), DomainRestriction::coexact, values_only(24));
    EXPECT_EQ(b.method, "dense");
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        EXPECT_NEAR(std::abs(a.pairs[i].value), std::abs(b.pairs[i].value), 1e-10);
    }
}

TEST(Spectrum, KrylovMatchesDense)
{
    const Galerkin g = TorusGalerkin::create(MetricField::conformal(TrigPolynomial::parse("0.15*cos(x1+x2) + 0.1*sin(x3-x5)"), 2), 1);
    // 12 closes the second cluster; a cut inside it makes the selection arbitrary.
    SpectrumOptions dense = values_only(12);
    SpectrumOptions krylov = dense;
    krylov.dense_threshold = 100;
    krylov.vectors = true;
    const SpectrumResult a = compute_spectrum(beltrami(g), DomainRestriction::coexact, dense);
    const SpectrumResult b = compute_spectrum(beltrami(g), DomainRestriction::coexact, krylov);
    EXPECT_EQ(b.method, "krylov");
    ASSERT_EQ(a.pairs.size(), b.pairs.size());
    // +-lambda ties in |lambda| may come out in either order.
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        va.push_back(a.pairs[i].value);
        vb.push_back(b.pairs[i].value);
        EXPECT_LT(beltrami_residual(*g, b.pairs[i].vector, b.pairs[i].value), 1e-9);
    }
    std::sort(va.begin(), va.end());
    std::sort(vb.begin(), vb.end());
    for (std::size_t i = 0; i < va.size(); ++i) {
        EXPECT_NEAR(va[i], vb[i], 1e-9);
    }
}

TEST(Spectrum, ErrorPaths)
{
    const Galerkin g = random_constant(23);
    EXPECT_THROW(compute_spectrum(beltrami(g), DomainRestriction::exact_harmonic), ContractError);
    SpectrumOptions strict = values_only(4);
    strict.residual_tolerance = 1e-30;
    EXPECT_THROW(compute_spectrum(beltrami(g), DomainRestriction::coexact, strict), NumericalError);
    SpectrumOptions small;
    small.dense_threshold = 10;
    EXPECT_THROW(compute_spectrum(identity_operator(g, 2), DomainRestriction::full, small), ContractError);
}

TEST(Realify, FlatFiberLift)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    Mode q = Mode::Zero();
    q(0) = 1;
    const BeltramiFiber f = beltrami_fiber(MetricTensor::identity(), q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f.a);
    const Eigen::VectorXd v = f.basis * es.eigenvectors().col(5);
    ASSERT_NEAR(es.eigenvalues()(5), 1.0, 1e-12);
    const FormField omega = FormField::single_mode(g->lattice(), q, FormFiber(2, v.cast<cdouble>()));
    const RealPair r = realify(g, omega, 1.0);
    EXPECT_LT(r.beltrami_alpha_defect, 1e-12);
    EXPECT_LT(r.beltrami_beta_defect, 1e-12);
    EXPECT_LT(r.cross_inner, 1e-12);
    EXPECT_LT(r.laplace_alpha_defect, 1e-12);
    EXPECT_LT(r.laplace_beta_defect, 1e-12);
    EXPECT_GT(r.independence, 0.5);
    EXPECT_TRUE(r.alpha.is_real());
    EXPECT_NEAR(l2_norm(*g, r.alpha), 1.0, 1e-12);
    EXPECT_NEAR(l2_norm(*g, r.beta), 1.0, 1e-12);
    EXPECT_THROW(realify(g, omega, 0.0), DegenerateError);
    EXPECT_THROW(realify(g, omega, 2.0), ContractError);
}

TEST(Realify, ConformalEigenpairs)
{
    const Galerkin g = conformal();
    SpectrumOptions o;
    o.count = 6;
    for (const auto& p : compute_spectrum(beltrami(g), DomainRestriction::coexact, o).pairs) {
        const RealPair r = realify(g, p.vector, p.value);
        EXPECT_LT(std::max(r.beltrami_alpha_defect, r.beltrami_beta_defect), 1e-8);
        EXPECT_LT(r.cross_inner, 1e-8);
        EXPECT_LT(std::max(r.laplace_alpha_defect, r.laplace_beta_defect), 1e-8);
        EXPECT_GT(r.independence, 1e-3);
    }
}

TEST(PairSpectrum, FlatLowestShellIsNonGeneric)
{
    const Galerkin g = TorusGalerkin::create(MetricField::flat(), 1);
    PairOptions o;
    o.count = 70;
    const SpectrumReport r = pair_spectrum(g, o);
    ASSERT_GE(r.clusters.size(), 2u);
    EXPECT_NEAR(r.clusters[0].value, 1.0, 1e-12);
    EXPECT_EQ(r.clusters[0].multiplicity, 60);
    EXPECT_EQ(r.clusters[0].verdict, "non-generic");
    EXPECT_EQ(r.clusters.back().verdict, "unresolved");
}

TEST(PairSpectrum, ConstantMetricClustersComeInTwelves)
{
    // A_q^2 = |q|_g^2 with zero trace: +-|q|_g three times each, and the
    // modes q, -q share the value.
    const Galerkin g = random_constant(24);
    PairOptions o;
    o.count = 48;
    const SpectrumReport r = pair_spectrum(g, o);
    for (const auto& c : r.clusters) {
        if (c.resolved) {
            EXPECT_EQ(c.multiplicity % 12, 0);
            EXPECT_EQ(c.verdict, "non-generic");
        }
    }
}

TEST(PairSpectrum, ConformalClustersArePairs)
{
    const Galerkin g = conformal();
    PairOptions o;
    o.count = 20;
    const SpectrumReport r = pair_spectrum(g, o);
    EXPECT_EQ(r.total_multiplicity(), 20);
    int resolved = 0;
    for (const auto& c : r.clusters) {
        if (c.resolved) {
            ++resolved;
            EXPECT_EQ(c.verdict, "pair");
        }
    }
    EXPECT_GE(resolved, 9);
}

TEST(SpectrumReport, JsonAndCsv)
{
    SpectrumReport r = cluster({1.0, 1.0, 2.0}, 1e-9);
    r.operator_name = "test";
    const auto j = r.to_json();
    EXPECT_EQ(j.at("schema_version"), 1);
    EXPECT_EQ(j.at("clusters").size(), 2u);
    EXPECT_EQ(j.at("clusters")[0].at("multiplicity"), 2);
    const std::string csv = r.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,value,multiplicity,max_residual,resolved,verdict");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}
