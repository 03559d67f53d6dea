#pragma once

#include <string>
#include <vector>

#include "doedr/feeder.hpp"
#include "doedr/household.hpp"

namespace fixture {

inline doedr::Matrix3c diagonal(std::complex<double> z) {
    doedr::Matrix3c m = doedr::Matrix3c::Zero();
    m.diagonal().setConstant(z);
    return m;
}

inline doedr::Matrix3c coupled(double r_self, double x_self, double r_mut, double x_mut) {
    doedr::Matrix3c m;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m(i, j) = i == j ? std::complex<double>(r_self, x_self) : std::complex<double>(r_mut, x_mut);
    }
    return m;
}

/// src -> load over one line, one household per phase at `load`.
inline doedr::FeederDescription two_bus(const doedr::Matrix3c& z_ohm, int households = 3) {
    doedr::FeederDescription d;
    d.slack_bus = "src";
    d.buses = {"src", "load"};
    d.lines.push_back({"src", "load", z_ohm});
    for (int p = 0; p < households; ++p) d.households.push_back({"h" + std::to_string(p + 1), "load", static_cast<std::size_t>(p)});
    return d;
}

/// Chain src - b1 - ... - bn with identical coupled lines and no households.
inline doedr::FeederDescription chain(int n, const doedr::Matrix3c& z_ohm) {
    doedr::FeederDescription d;
    d.slack_bus = "src";
    d.buses = {"src"};
    std::string prev = "src";
    for (int i = 1; i <= n; ++i) {
        const std::string b = "b" + std::to_string(i);
        d.buses.push_back(b);
        d.lines.push_back({prev, b, z_ohm});
        prev = b;
    }
    return d;
}

inline doedr::HouseholdSpec doe_spec(const std::string& id, double ac_kw = 2.0) {
    doedr::HouseholdSpec h;
    h.id = id;
    h.cls = doedr::HouseholdClass::Doe;
    h.pv_rating_kw = 5.0;
    h.ac_rating_kw = ac_kw;
    return h;
}

inline doedr::HouseholdSpec fixed_spec(const std::string& id, doedr::HouseholdClass cls) {
    doedr::HouseholdSpec h;
    h.id = id;
    h.cls = cls;
    h.pv_rating_kw = cls == doedr::HouseholdClass::Passive ? 0.0 : 6.0;
    return h;
}

}  // namespace fixture
