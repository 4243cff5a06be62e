#pragma once

#include "hodge5/errors.hpp"

#include <Eigen/Core>

#include <vector>

namespace hodge5 {

using Mode = Eigen::Matrix<int, 5, 1>;

/// Integer wave vectors with max-norm <= K, ordered lexicographically with
/// the first component varying slowest. Index i and size()-1-i are negatives
/// of each other.
class ModeLattice {
public:
    explicit ModeLattice(int radius);

    int radius() const { return m_radius; }
    int side() const { return 2 * m_radius + 1; }
    int size() const { return static_cast<int>(m_modes.size()); }

    const Mode& mode(int index) const { return m_modes[static_cast<std::size_t>(index)]; }
    bool contains(const Mode& q) const { return q.cwiseAbs().maxCoeff() <= m_radius; }

    /// Throws ArgumentError for modes outside the lattice.
    int index(const Mode& q) const;
    int negated(int index) const { return size() - 1 - index; }
    int zero_index() const { return size() / 2; }

    bool operator==(const ModeLattice& other) const { return m_radius == other.m_radius; }
    bool operator!=(const ModeLattice& other) const { return !(*this == other); }

private:
    int m_radius;
    std::vector<Mode> m_modes;
};

} // namespace hodge5
