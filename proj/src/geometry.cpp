#include "doedr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "doedr/error.hpp"

namespace doedr {

namespace {

struct TwoTerm {
    double hi;
    double lo;
};

TwoTerm two_sum(double a, double b) {
    const double x = a + b;
    const double bv = x - a;
    const double av = x - bv;
    return {x, (a - av) + (b - bv)};
}

TwoTerm two_product(double a, double b) {
    const double x = a * b;
    return {x, std::fma(a, b, -x)};
}

// Adds b to a non-overlapping expansion kept in increasing magnitude order.
void grow_expansion(std::vector<double>& e, double b) {
    std::vector<double> h;
    h.reserve(e.size() + 1);
    double q = b;
    for (const double component : e) {
        const auto [sum, err] = two_sum(q, component);
        q = sum;
        if (err != 0.0) h.push_back(err);
    }
    if (q != 0.0) h.push_back(q);
    e.swap(h);
}

int exact_orientation(const PQ& a, const PQ& b, const PQ& c) {
    // (ax-cx)(by-cy) - (ay-cy)(bx-cx) expanded into products of raw coordinates;
    // the cx*cy terms cancel.
    const std::array<TwoTerm, 6> terms{
        two_product(a.p, b.q),  two_product(-a.p, c.q), two_product(-c.p, b.q),
        two_product(-a.q, b.p), two_product(a.q, c.p),  two_product(c.q, b.p),
    };
    std::vector<double> expansion;
    for (const auto& t : terms) {
        grow_expansion(expansion, t.lo);
        grow_expansion(expansion, t.hi);
    }
    if (expansion.empty()) return 0;
    return expansion.back() > 0.0 ? 1 : -1;
}

}  // namespace

int orientation(const PQ& a, const PQ& b, const PQ& c) {
    constexpr double eps = std::numeric_limits<double>::epsilon() / 2.0;
    constexpr double err_bound = (3.0 + 16.0 * eps) * eps;
    const double left = (a.p - c.p) * (b.q - c.q);
    const double right = (a.q - c.q) * (b.p - c.p);
    const double det = left - right;
    const double bound = err_bound * (std::abs(left) + std::abs(right));
    if (det > bound) return 1;
    if (-det > bound) return -1;
    return exact_orientation(a, b, c);
}

std::vector<PQ> convex_hull(std::span<const PQ> points) {
    if (points.empty()) throw InputError("convex hull of an empty point set");
    std::vector<PQ> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const PQ& x, const PQ& y) { return x.p < y.p || (x.p == y.p && x.q < y.q); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<PQ> hull;
    hull.reserve(2 * pts.size());
    for (const auto& p : pts) {
        while (hull.size() >= 2 && orientation(hull[hull.size() - 2], hull.back(), p) <= 0) hull.pop_back();
        hull.push_back(p);
    }
    const std::size_t lower = hull.size() + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (hull.size() >= lower && orientation(hull[hull.size() - 2], hull.back(), *it) <= 0) hull.pop_back();
        hull.push_back(*it);
    }
    hull.pop_back();
    return hull;
}

double HalfSpaceRep::max_violation(const PQ& x) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < b.size(); ++i) worst = std::max(worst, a[i][0] * x.p + a[i][1] * x.q - b[i]);
    return worst;
}

HalfSpaceRep halfspace_rep(std::span<const PQ> hull) {
    if (hull.empty()) throw InputError("half-space representation of an empty hull");
    HalfSpaceRep rep;
    if (hull.size() < 3) {
        double p_lo = hull[0].p, p_hi = hull[0].p, q_lo = hull[0].q, q_hi = hull[0].q;
        for (const auto& v : hull) {
            p_lo = std::min(p_lo, v.p);
            p_hi = std::max(p_hi, v.p);
            q_lo = std::min(q_lo, v.q);
            q_hi = std::max(q_hi, v.q);
        }
        rep.a = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}};
        rep.b = {p_hi, -p_lo, q_hi, -q_lo};
        rep.degenerate = true;
        return rep;
    }
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const PQ& u = hull[i];
        const PQ& v = hull[(i + 1) % hull.size()];
        const double dp = v.p - u.p;
        const double dq = v.q - u.q;
        const double len = std::hypot(dp, dq);
        const std::array<double, 2> normal{dq / len, -dp / len};
        rep.a.push_back(normal);
        rep.b.push_back(std::max(normal[0] * u.p + normal[1] * u.q, normal[0] * v.p + normal[1] * v.q));
    }
    return rep;
}

}  // namespace doedr
