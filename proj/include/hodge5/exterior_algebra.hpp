#pragma once

// Fiber-level multilinear algebra of k-forms on an oriented 5-dimensional
// inner-product space. Components of a k-form are stored for strictly
// increasing multi-indices in lexicographic order; every sign flows through
// permutation_sign().

#include "hodge5/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

namespace hodge5 {

inline constexpr int kDimension = 5;

using cdouble = std::complex<double>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;
using Matrix5cd = Eigen::Matrix<cdouble, 5, 5>;
using Vector5d = Eigen::Matrix<double, 5, 1>;

/// C(5, k), the number of stored components of a k-form.
int form_dimension(int k);

/// The C(5,k) strictly increasing zero-based multi-indices of rank k, sorted
/// lexicographically.
class IndexBasis {
public:
    /// Shared instance for rank k in 0..5.
    static const IndexBasis& of(int k);

    int rank() const { return m_rank; }
    int size() const { return static_cast<int>(m_entries.size()); }

    std::span<const int> tuple(int position) const
    {
        return {m_entries[static_cast<std::size_t>(position)].data(), static_cast<std::size_t>(m_rank)};
    }

    /// Position of a strictly increasing zero-based tuple, or -1 if the tuple
    /// is not stored (wrong length, repeated or unsorted entries).
    int position(std::span<const int> tuple) const;

private:
    explicit IndexBasis(int k);

    int m_rank;
    std::vector<std::array<int, kDimension>> m_entries;
    std::array<int, 32> m_by_mask{};
};

/// Sign of the permutation that sorts `indices`; 0 if an entry repeats.
int permutation_sign(std::span<const int> indices);

/// Levi-Civita symbol on five one-based indices in 1..5.
int perm_sign(std::span<const int> indices);
inline int perm_sign(std::initializer_list<int> indices)
{
    return perm_sign(std::span<const int>(indices.begin(), indices.size()));
}

enum class ScalarKind { real, complex };

inline ScalarKind promote(ScalarKind a, ScalarKind b)
{
    return (a == ScalarKind::complex || b == ScalarKind::complex) ? ScalarKind::complex : ScalarKind::real;
}

/// Symmetric positive-definite (0,2)-tensor at a point, with cached inverse,
/// determinant and symmetric square roots.
class MetricTensor {
public:
    /// Throws MetricError unless `g` is symmetric and its smallest eigenvalue
    /// exceeds 1e-10 times its largest.
    explicit MetricTensor(const Matrix5d& g);

    static MetricTensor identity() { return MetricTensor(Matrix5d::Identity()); }

    const Matrix5d& matrix() const { return m_g; }
    const Matrix5d& inverse() const { return m_inverse; }
    const Matrix5d& sqrt() const { return m_sqrt; }
    const Matrix5d& inverse_sqrt() const { return m_inverse_sqrt; }
    const Vector5d& eigenvalues() const { return m_eigenvalues; }
    double determinant() const { return m_determinant; }
    double sqrt_determinant() const { return std::sqrt(m_determinant); }

private:
    Matrix5d m_g;
    Matrix5d m_inverse;
    Matrix5d m_sqrt;
    Matrix5d m_inverse_sqrt;
    Vector5d m_eigenvalues;
    double m_determinant;
};

/// Coefficients of a k-form at a point (or at one Fourier mode).
struct FormFiber {
    int rank = 0;
    Eigen::VectorXcd coeffs;
    ScalarKind kind = ScalarKind::real;

    FormFiber() : coeffs(Eigen::VectorXcd::Zero(1)) {}
    FormFiber(int k, Eigen::VectorXcd c, ScalarKind s = ScalarKind::complex);

    static FormFiber zero(int k, ScalarKind s = ScalarKind::real);

    /// dx^{i1} ^ ... ^ dx^{ik} for one-based increasing indices, e.g. {1, 2}.
    static FormFiber basis(std::initializer_list<int> one_based);

    int size() const { return static_cast<int>(coeffs.size()); }

    /// Component for an arbitrary zero-based index tuple, with the
    /// antisymmetric sign applied (zero on repeated indices).
    cdouble component(std::span<const int> indices) const;
};

/// Symmetric (0,2)-tensor at a point. Complex values are allowed only where
/// an operation says so.
class SymTensor {
public:
    SymTensor() : m_h(Matrix5cd::Zero()) {}
    explicit SymTensor(const Matrix5d& h);
    explicit SymTensor(const Matrix5cd& h);

    const Matrix5cd& matrix() const { return m_h; }
    ScalarKind kind() const { return m_kind; }
    Matrix5d real_matrix() const { return m_h.real(); }

private:
    Matrix5cd m_h;
    ScalarKind m_kind = ScalarKind::real;
};

/// k-th compound matrix: entry (I, J) is the minor det(a[I, J]).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
compound_matrix(const Eigen::MatrixBase<Derived>& a, int k)
{
    using Scalar = typename Derived::Scalar;
    using Dense = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const IndexBasis& basis = IndexBasis::of(k);
    const int n = basis.size();
    Dense c(n, n);
    if (k == 0) {
        c(0, 0) = Scalar(1);
        return c;
    }
    Dense minor(k, k);
    for (int i = 0; i < n; ++i) {
        const auto rows = basis.tuple(i);
        for (int j = 0; j < n; ++j) {
            const auto cols = basis.tuple(j);
            for (int r = 0; r < k; ++r) {
                for (int s = 0; s < k; ++s) {
                    minor(r, s) = a(rows[static_cast<std::size_t>(r)], cols[static_cast<std::size_t>(s)]);
                }
            }
            c(i, j) = minor.determinant();
        }
    }
    return c;
}

/// Flat duality E_k : Lambda^k -> Lambda^{5-k}, (E_k)_{J,I} = eps(I, J).
/// Signed permutation with E_{5-k} = E_k^T and E_k^T E_k = identity.
const Eigen::MatrixXd& duality_matrix(int k);

/// Matrix of u -> v ^ u for a fixed rank-p coefficient vector v, acting on rank q.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
wedge_matrix(const Eigen::MatrixBase<Derived>& v, int p, int q)
{
    using Scalar = typename Derived::Scalar;
    if (p < 0 || q < 0 || p + q > kDimension) {
        throw RankError("wedge: ranks " + std::to_string(p) + " + " + std::to_string(q) + " exceed 5");
    }
    const IndexBasis& left = IndexBasis::of(p);
    const IndexBasis& right = IndexBasis::of(q);
    const IndexBasis& out = IndexBasis::of(p + q);
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(out.size(), right.size());
    std::array<int, kDimension> joined{};
    for (int a = 0; a < left.size(); ++a) {
        const auto ia = left.tuple(a);
        for (int b = 0; b < right.size(); ++b) {
            const auto ib = right.tuple(b);
            std::copy(ia.begin(), ia.end(), joined.begin());
            std::copy(ib.begin(), ib.end(), joined.begin() + p);
            const std::span<const int> all(joined.data(), static_cast<std::size_t>(p + q));
            const int sign = permutation_sign(all);
            if (sign == 0) {
                continue;
            }
            std::array<int, kDimension> sorted = joined;
            std::sort(sorted.begin(), sorted.begin() + p + q);
            const int row = out.position(std::span<const int>(sorted.data(), static_cast<std::size_t>(p + q)));
            m(row, b) += Scalar(sign) * v(a);
        }
    }
    return m;
}

/// Matrix of u -> q ^ u for the one-form q_j dx^j, acting on rank k.
Eigen::MatrixXd covector_wedge_matrix(const Vector5d& q, int k);

/// Unweighted fiber Gram matrix C_k(g^{-1}): <u, v> = v^H C_k(g^{-1}) u.
Eigen::MatrixXd fiber_metric_matrix(const MetricTensor& g, int k);

/// Measure-weighted fiber Gram matrix |g|^{1/2} C_k(g^{-1}).
Eigen::MatrixXd fiber_mass_matrix(const MetricTensor& g, int k);

/// Matrix of the Hodge star Lambda^k -> Lambda^{5-k}: |g|^{1/2} E_k C_k(g^{-1}).
Eigen::MatrixXd hodge_star_matrix(const MetricTensor& g, int k);

FormFiber wedge(const FormFiber& u, const FormFiber& v);

FormFiber hodge_star(const MetricTensor& g, const FormFiber& u);

enum class Measure { unweighted, weighted };

/// Pointwise pairing sum_I u_I conj(v^I), indices raised with g^{-1};
/// multiplied by |g|^{1/2} for Measure::weighted. Conjugate-linear in v.
cdouble fiber_inner(const MetricTensor& g, const FormFiber& u, const FormFiber& v, Measure measure = Measure::unweighted);

/// (-1)^{n(k+1)+1}: delta_g = sign * (*d*) on k-forms of an n-manifold.
int codifferential_sign(int n, int k);

/// (-1)^{nk+1}: Delta = sign * (*d)^2 on co-exact k-forms.
int laplacian_sign(int n, int k);

/// Full contraction g^{ij} h_{ij}.
cdouble trace(const MetricTensor& g, const SymTensor& h);

/// Antisymmetric 5x5 matrix of a 2-form, W_{ij} = w_{ij}.
Matrix5cd two_form_matrix(const Eigen::Ref<const Eigen::VectorXcd>& w);

/// Strictly upper entries of an antisymmetric matrix as 2-form coefficients.
Eigen::VectorXcd two_form_coefficients(const Matrix5cd& w);

} // namespace hodge5
