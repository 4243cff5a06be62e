#include "hodge5/lattice.hpp"

#include <string>

namespace hodge5 {

ModeLattice::ModeLattice(int radius) : m_radius(radius)
{
    if (radius < 0) {
        throw ArgumentError("lattice radius must be non-negative, got " + std::to_string(radius));
    }
    const int s = side();
    const int count = s * s * s * s * s;
    m_modes.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Mode q;
        int rest = i;
        for (int axis = 4; axis >= 0; --axis) {
            q(axis) = rest % s - radius;
            rest /= s;
        }
        m_modes.push_back(q);
    }
}

int ModeLattice::index(const Mode& q) const
{
    if (!contains(q)) {
        throw ArgumentError("mode outside lattice of radius " + std::to_string(m_radius));
    }
    int idx = 0;
    for (int axis = 0; axis < 5; ++axis) {
        idx = idx * side() + (q(axis) + m_radius);
    }
    return idx;
}

} // namespace hodge5
