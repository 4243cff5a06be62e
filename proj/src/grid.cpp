#include "hodge5/grid.hpp"

#include <numbers>
#include <string>

namespace hodge5 {

namespace {

using RowMatrix = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace

CollocationGrid::CollocationGrid(int n) : m_n(n)
{
    if (n < 1) {
        throw ArgumentError("grid needs at least one point per axis");
    }
}

Vector5d CollocationGrid::point(int index) const
{
    Vector5d x;
    for (int axis = 4; axis >= 0; --axis) {
        x(axis) = 2.0 * std::numbers::pi * (index % m_n) / m_n;
        index /= m_n;
    }
    return x;
}

int CollocationGrid::frequency_index(const Mode& q) const
{
    int idx = 0;
    for (int axis = 0; axis < 5; ++axis) {
        idx = idx * m_n + ((q(axis) % m_n) + m_n) % m_n;
    }
    return idx;
}

// Applies the same matrix along each of the five axes in turn.
Eigen::VectorXcd CollocationGrid::transform(const Eigen::VectorXcd& in, int in_side, int out_side,
                                            const Eigen::MatrixXcd& axis, int components) const
{
    Eigen::VectorXcd cur = in;
    std::array<int, 5> dims{in_side, in_side, in_side, in_side, in_side};
    for (int a = 0; a < 5; ++a) {
        long pre = 1;
        for (int b = 0; b < a; ++b) {
            pre *= dims[static_cast<std::size_t>(b)];
        }
        long post = components;
        for (int b = a + 1; b < 5; ++b) {
            post *= dims[static_cast<std::size_t>(b)];
        }
        Eigen::VectorXcd next(pre * out_side * post);
        for (long p = 0; p < pre; ++p) {
            Eigen::Map<const RowMatrix> src(cur.data() + p * in_side * post, in_side, post);
            Eigen::Map<RowMatrix> dst(next.data() + p * out_side * post, out_side, post);
            dst.noalias() = axis * src;
        }
        cur.swap(next);
        dims[static_cast<std::size_t>(a)] = out_side;
    }
    return cur;
}

Eigen::VectorXcd CollocationGrid::synthesize(const ModeLattice& lattice, const Eigen::VectorXcd& coeffs,
                                             int components) const
{
    if (coeffs.size() != static_cast<long>(lattice.size()) * components) {
        throw ArgumentError("synthesize: coefficient count does not match lattice");
    }
    const int s = lattice.side();
    Eigen::MatrixXcd axis(m_n, s);
    for (int j = 0; j < m_n; ++j) {
        for (int q = 0; q < s; ++q) {
            const double phase = 2.0 * std::numbers::pi * j * (q - lattice.radius()) / m_n;
            axis(j, q) = std::polar(1.0, phase);
        }
    }
    return transform(coeffs, s, m_n, axis, components);
}

Eigen::VectorXcd CollocationGrid::analyze(const ModeLattice& lattice, const Eigen::VectorXcd& values,
                                          int components) const
{
    if (m_n < lattice.side()) {
        throw ConfigurationError("grid with " + std::to_string(m_n) + " points per axis cannot resolve lattice radius " +
                                 std::to_string(lattice.radius()));
    }
    if (values.size() != static_cast<long>(size()) * components) {
        throw ArgumentError("analyze: value count does not match grid");
    }
    const int s = lattice.side();
    Eigen::MatrixXcd axis(s, m_n);
    for (int q = 0; q < s; ++q) {
        for (int j = 0; j < m_n; ++j) {
            const double phase = -2.0 * std::numbers::pi * j * (q - lattice.radius()) / m_n;
            axis(q, j) = std::polar(1.0, phase) / static_cast<double>(m_n);
        }
    }
    return transform(values, m_n, s, axis, components);
}

Eigen::VectorXcd CollocationGrid::full_spectrum(const Eigen::VectorXcd& values, int components) const
{
    if (values.size() != static_cast<long>(size()) * components) {
        throw ArgumentError("full_spectrum: value count does not match grid");
    }
    Eigen::MatrixXcd axis(m_n, m_n);
    for (int p = 0; p < m_n; ++p) {
        for (int j = 0; j < m_n; ++j) {
            axis(p, j) = std::polar(1.0, -2.0 * std::numbers::pi * j * p / m_n) / static_cast<double>(m_n);
        }
    }
    return transform(values, m_n, m_n, axis, components);
}

} // namespace hodge5
