#pragma once

#include <array>
#include <span>
#include <vector>

#include "doedr/types.hpp"

namespace doedr {

/// Sign of the orientation determinant of (a, b, c): +1 counter-clockwise,
/// -1 clockwise, 0 collinear. Exact for finite double inputs (floating-point
/// filter with an error-free expansion fallback).
int orientation(const PQ& a, const PQ& b, const PQ& c);

/// Minimal counter-clockwise hull vertex list, starting at the lowest
/// (p, then q) point. Collinear boundary points are dropped. A single distinct
/// point yields one vertex, a collinear set yields its two end points.
std::vector<PQ> convex_hull(std::span<const PQ> points);

/// A x <= b with unit-norm rows. `degenerate` marks a point or segment hull
/// encoded as its axis-aligned bounding inequalities.
struct HalfSpaceRep {
    std::vector<std::array<double, 2>> a;
    std::vector<double> b;
    bool degenerate = false;

    std::size_t rows() const { return b.size(); }
    /// Largest violation max_i (a_i . x - b_i); <= 0 inside.
    double max_violation(const PQ& x) const;
    bool contains(const PQ& x, double tol = 1e-9) const { return max_violation(x) <= tol; }
};

/// One row per hull edge with outward unit normal. Hulls with fewer than three
/// vertices become the four box rows +-e1, +-e2 and are flagged degenerate.
HalfSpaceRep halfspace_rep(std::span<const PQ> hull);

}  // namespace doedr
