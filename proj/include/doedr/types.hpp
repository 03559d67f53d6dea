#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>

namespace doedr {

using Complex = std::complex<double>;

inline constexpr std::size_t kPhases = 3;

/// Point in the P-Q plane, (kW, kvar), export positive.
struct PQ {
    double p = 0.0;
    double q = 0.0;

    friend bool operator==(const PQ&, const PQ&) = default;
};

/// Closed interval [lo, hi]. Empty intervals are represented by std::nullopt
/// at API boundaries; an Interval value is always non-empty.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
    double clamp(double x) const { return std::clamp(x, lo, hi); }
    double width() const { return hi - lo; }

    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Intersection of two closed intervals; nullopt when disjoint.
inline std::optional<Interval> intersect(const Interval& a, const Interval& b) {
    Interval out{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
    if (out.lo > out.hi) return std::nullopt;
    return out;
}

/// Phase letters used in files: a, b, c.
inline char phase_letter(std::size_t phase) { return static_cast<char>('a' + phase); }

}  // namespace doedr
