#pragma once

#include "hodge5/exterior_algebra.hpp"
#include "hodge5/lattice.hpp"

#include <Eigen/Dense>

namespace hodge5 {

/// Uniform n^5 collocation grid on (R/2piZ)^5 with x_j = 2 pi j / n per axis.
/// Point index is lexicographic with the first axis slowest. Multi-component
/// data is stored point-major: value c of point p sits at p * components + c.
class CollocationGrid {
public:
    explicit CollocationGrid(int n);

    /// Grid with 2 * radius + 1 points per axis.
    static CollocationGrid with_radius(int radius) { return CollocationGrid(2 * radius + 1); }

    int n() const { return m_n; }
    int size() const { return m_n * m_n * m_n * m_n * m_n; }
    Vector5d point(int index) const;

    /// Values sum_q c_q e^{i q.x} at every grid point.
    Eigen::VectorXcd synthesize(const ModeLattice& lattice, const Eigen::VectorXcd& coeffs, int components) const;

    /// Discrete Fourier coefficients (1/n^5) sum_x u(x) e^{-i q.x} for the
    /// lattice modes. Throws ConfigurationError when n < 2K+1 (modes alias).
    Eigen::VectorXcd analyze(const ModeLattice& lattice, const Eigen::VectorXcd& values, int components) const;

    /// All n^5 discrete Fourier coefficients, frequency p_j in 0..n-1 per axis,
    /// in point ordering.
    Eigen::VectorXcd full_spectrum(const Eigen::VectorXcd& values, int components) const;

    /// Index of the frequency q (mod n) in full_spectrum output.
    int frequency_index(const Mode& q) const;

private:
    Eigen::VectorXcd transform(const Eigen::VectorXcd& in, int in_side, int out_side, const Eigen::MatrixXcd& axis,
                               int components) const;

    int m_n;
};

} // namespace hodge5
