#include "hodge5/exterior_algebra.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <mutex>

namespace hodge5 {

namespace {

void check_rank(int k)
{
    if (k < 0 || k > kDimension) {
        throw RankError("form rank " + std::to_string(k) + " outside 0..5");
    }
}

} // namespace

int form_dimension(int k)
{
    static constexpr std::array<int, 6> dims{1, 5, 10, 10, 5, 1};
    check_rank(k);
    return dims[static_cast<std::size_t>(k)];
}

IndexBasis::IndexBasis(int k) : m_rank(k)
{
    m_by_mask.fill(-1);
    // Lexicographic order of increasing tuples equals the order of masks
    // read from the lowest index, so enumerate tuples recursively.
    std::array<int, kDimension> cur{};
    auto rec = [&](auto&& self, int depth, int start) -> void {
        if (depth == k) {
            int mask = 0;
            for (int i = 0; i < k; ++i) {
                mask |= 1 << cur[static_cast<std::size_t>(i)];
            }
            m_by_mask[static_cast<std::size_t>(mask)] = static_cast<int>(m_entries.size());
            m_entries.push_back(cur);
            return;
        }
        for (int v = start; v < kDimension; ++v) {
            cur[static_cast<std::size_t>(depth)] = v;
            self(self, depth + 1, v + 1);
        }
    };
    rec(rec, 0, 0);
}

const IndexBasis& IndexBasis::of(int k)
{
    check_rank(k);
    static const std::array<IndexBasis, 6> all{IndexBasis(0), IndexBasis(1), IndexBasis(2),
                                               IndexBasis(3), IndexBasis(4), IndexBasis(5)};
    return all[static_cast<std::size_t>(k)];
}

int IndexBasis::position(std::span<const int> tuple) const
{
    if (static_cast<int>(tuple.size()) != m_rank) {
        return -1;
    }
    int mask = 0;
    int prev = -1;
    for (int v : tuple) {
        if (v <= prev || v >= kDimension) {
            return -1;
        }
        mask |= 1 << v;
        prev = v;
    }
    return m_by_mask[static_cast<std::size_t>(mask)];
}

int permutation_sign(std::span<const int> indices)
{
    int inversions = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        for (std::size_t j = i + 1; j < indices.size(); ++j) {
            if (indices[i] == indices[j]) {
                return 0;
            }
            if (indices[i] > indices[j]) {
                ++inversions;
            }
        }
    }
    return (inversions % 2 == 0) ? 1 : -1;
}

int perm_sign(std::span<const int> indices)
{
    if (indices.size() != static_cast<std::size_t>(kDimension)) {
        throw ArgumentError("perm_sign expects 5 indices, got " + std::to_string(indices.size()));
    }
    for (int v : indices) {
        if (v < 1 || v > kDimension) {
            throw ArgumentError("perm_sign index " + std::to_string(v) + " outside 1..5");
        }
    }
    return permutation_sign(indices);
}

MetricTensor::MetricTensor(const Matrix5d& g) : m_g(g)
{
    if (!g.allFinite()) {
        throw MetricError("metric has non-finite entries");
    }
    const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw MetricError("metric is not symmetric");
    }
    m_g = 0.5 * (g + g.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix5d> es(m_g);
    m_eigenvalues = es.eigenvalues();
    const double lo = m_eigenvalues.minCoeff();
    const double hi = m_eigenvalues.maxCoeff();
    if (!(hi > 0.0) || lo <= 1e-10 * hi) {
        throw MetricError("metric is not positive definite (eigenvalues " + std::to_string(lo) + " .. " +
                          std::to_string(hi) + ")");
    }
    const Matrix5d& v = es.eigenvectors();
    m_inverse = v * m_eigenvalues.cwiseInverse().asDiagonal() * v.transpose();
    m_sqrt = v * m_eigenvalues.cwiseSqrt().asDiagonal() * v.transpose();
    m_inverse_sqrt = v * m_eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
    m_determinant = m_eigenvalues.prod();
}

FormFiber::FormFiber(int k, Eigen::VectorXcd c, ScalarKind s) : rank(k), coeffs(std::move(c)), kind(s)
{
    if (coeffs.size() != form_dimension(k)) {
        throw ArgumentError("rank-" + std::to_string(k) + " form needs " + std::to_string(form_dimension(k)) +
                            " coefficients, got " + std::to_string(coeffs.size()));
    }
}

FormFiber FormFiber::zero(int k, ScalarKind s)
{
    return FormFiber(k, Eigen::VectorXcd::Zero(form_dimension(k)), s);
}

FormFiber FormFiber::basis(std::initializer_list<int> one_based)
{
    std::vector<int> idx;
    for (int v : one_based) {
        if (v < 1 || v > kDimension) {
            throw ArgumentError("basis index " + std::to_string(v) + " outside 1..5");
        }
        idx.push_back(v - 1);
    }
    const int k = static_cast<int>(idx.size());
    check_rank(k);
    const int pos = IndexBasis::of(k).position(idx);
    if (pos < 0) {
        throw ArgumentError("basis indices must be strictly increasing");
    }
    FormFiber f = zero(k);
    f.coeffs(pos) = 1.0;
    return f;
}

cdouble FormFiber::component(std::span<const int> indices) const
{
    if (static_cast<int>(indices.size()) != rank) {
        throw ArgumentError("component tuple length does not match rank");
    }
    const int sign = permutation_sign(indices);
    if (sign == 0) {
        return 0.0;
    }
    std::array<int, kDimension> sorted{};
    std::copy(indices.begin(), indices.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + rank);
    const int pos = IndexBasis::of(rank).position(std::span<const int>(sorted.data(), indices.size()));
    if (pos < 0) {
        throw ArgumentError("component index outside 0..4");
    }
    return static_cast<double>(sign) * coeffs(pos);
}

SymTensor::SymTensor(const Matrix5d& h) : m_h(h.cast<cdouble>()), m_kind(ScalarKind::real)
{
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
        throw ArgumentError("symmetric tensor is not symmetric");
    }
    m_h = (0.5 * (h + h.transpose())).cast<cdouble>();
}

SymTensor::SymTensor(const Matrix5cd& h) : m_h(h), m_kind(ScalarKind::complex)
{
    if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff())) {
        throw ArgumentError("symmetric tensor is not symmetric");
    }
    m_h = 0.5 * (h + h.transpose());
    if (m_h.imag().cwiseAbs().maxCoeff() == 0.0) {
        m_kind = ScalarKind::real;
    }
}

const Eigen::MatrixXd& duality_matrix(int k)
{
    check_rank(k);
    static std::array<Eigen::MatrixXd, 6> cache;
    static std::once_flag once;
    std::call_once(once, [] {
        for (int r = 0; r <= kDimension; ++r) {
            const IndexBasis& from = IndexBasis::of(r);
            const IndexBasis& to = IndexBasis::of(kDimension - r);
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(to.size(), from.size());
            for (int i = 0; i < from.size(); ++i) {
                std::array<int, kDimension> joined{};
                const auto ti = from.tuple(i);
                std::copy(ti.begin(), ti.end(), joined.begin());
                int mask = 0;
                for (int v : ti) {
                    mask |= 1 << v;
                }
                std::array<int, kDimension> rest{};
                int m = 0;
                for (int v = 0; v < kDimension; ++v) {
                    if (!(mask & (1 << v))) {
                        rest[static_cast<std::size_t>(m++)] = v;
                        joined[static_cast<std::size_t>(r + m - 1)] = v;
                    }
                }
                const int j = to.position(std::span<const int>(rest.data(), static_cast<std::size_t>(m)));
                e(j, i) = permutation_sign(joined);
            }
            cache[static_cast<std::size_t>(r)] = e;
        }
    });
    return cache[static_cast<std::size_t>(k)];
}

Eigen::MatrixXd covector_wedge_matrix(const Vector5d& q, int k)
{
    return wedge_matrix(q, 1, k);
}

Eigen::MatrixXd fiber_metric_matrix(const MetricTensor& g, int k)
{
    check_rank(k);
    Eigen::MatrixXd c = compound_matrix(g.inverse(), k);
    return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd fiber_mass_matrix(const MetricTensor& g, int k)
{
    return g.sqrt_determinant() * fiber_metric_matrix(g, k);
}

Eigen::MatrixXd hodge_star_matrix(const MetricTensor& g, int k)
{
    return duality_matrix(k) * fiber_mass_matrix(g, k);
}

FormFiber wedge(const FormFiber& u, const FormFiber& v)
{
    if (u.rank + v.rank > kDimension) {
        throw RankError("wedge of ranks " + std::to_string(u.rank) + " and " + std::to_string(v.rank) + " exceeds 5");
    }
    Eigen::VectorXcd c = wedge_matrix(u.coeffs, u.rank, v.rank) * v.coeffs;
    return FormFiber(u.rank + v.rank, std::move(c), promote(u.kind, v.kind));
}

FormFiber hodge_star(const MetricTensor& g, const FormFiber& u)
{
    Eigen::VectorXcd c = hodge_star_matrix(g, u.rank).cast<cdouble>() * u.coeffs;
    return FormFiber(kDimension - u.rank, std::move(c), u.kind);
}

cdouble fiber_inner(const MetricTensor& g, const FormFiber& u, const FormFiber& v, Measure measure)
{
    if (u.rank != v.rank) {
        throw RankError("fiber_inner of ranks " + std::to_string(u.rank) + " and " + std::to_string(v.rank));
    }
    const Eigen::MatrixXd& c = measure == Measure::weighted ? fiber_mass_matrix(g, u.rank)
                                                            : fiber_metric_matrix(g, u.rank);
    return v.coeffs.dot(c.cast<cdouble>() * u.coeffs);
}

int codifferential_sign(int n, int k)
{
    if (n < 1 || k < 0 || k > n) {
        throw ArgumentError("codifferential_sign requires 0 <= k <= n");
    }
    return ((n * (k + 1) + 1) % 2 == 0) ? 1 : -1;
}

int laplacian_sign(int n, int k)
{
    if (n < 1 || k < 0 || k > n) {
        throw ArgumentError("laplacian_sign requires 0 <= k <= n");
    }
    return ((n * k + 1) % 2 == 0) ? 1 : -1;
}

cdouble trace(const MetricTensor& g, const SymTensor& h)
{
    return (g.inverse().cast<cdouble>() * h.matrix()).trace();
}

Matrix5cd two_form_matrix(const Eigen::Ref<const Eigen::VectorXcd>& w)
{
    if (w.size() != 10) {
        throw ArgumentError("2-form needs 10 coefficients");
    }
    const IndexBasis& b = IndexBasis::of(2);
    Matrix5cd m = Matrix5cd::Zero();
    for (int p = 0; p < b.size(); ++p) {
        const auto t = b.tuple(p);
        m(t[0], t[1]) = w(p);
        m(t[1], t[0]) = -w(p);
    }
    return m;
}

Eigen::VectorXcd two_form_coefficients(const Matrix5cd& w)
{
    const IndexBasis& b = IndexBasis::of(2);
    Eigen::VectorXcd c(b.size());
    for (int p = 0; p < b.size(); ++p) {
        const auto t = b.tuple(p);
        c(p) = 0.5 * (w(t[0], t[1]) - w(t[1], t[0]));
    }
    return c;
}

} // namespace hodge5
