#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "doedr/error.hpp"
#include "doedr/feeder.hpp"
#include "doedr/powerflow.hpp"
#include "fixtures.hpp"

using namespace doedr;

namespace {

const std::string kData = DOEDR_DATA_DIR;

bool throws_with(const FeederDescription& d, const std::string& needle) {
    try {
        build_feeder(d);
    } catch (const ConfigError& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_CASE("bundled feeders load") {
    const auto two = load_feeder(kData + "/feeder_2bus.cfg");
    CHECK(two.buses().size() == 2);
    CHECK(two.households().size() == 3);
    CHECK(two.lines()[0].impedance_ohm(1, 0) == Complex(0.003, 0.009));

    const auto big = load_feeder(kData + "/feeder_34bus.cfg");
    CHECK(big.buses().size() == 35);
    CHECK(big.lines().size() == 34);
    CHECK(big.households().size() == 102);
    CHECK(big.find_household("h001").has_value());
    CHECK_FALSE(big.find_household("h999").has_value());
}

TEST_CASE("topology and assignment errors") {
    auto loop = fixture::chain(3, fixture::diagonal({0.1, 0.1}));
    loop.lines.push_back({"b3", "b1", fixture::diagonal({0.1, 0.1})});
    CHECK(throws_with(loop, "non-radial"));
    CHECK(throws_with(loop, "b3-b1"));

    auto island = fixture::chain(2, fixture::diagonal({0.1, 0.1}));
    island.buses.push_back("lonely");
    CHECK(throws_with(island, "lonely"));

    auto dup = fixture::two_bus(fixture::diagonal({0.1, 0.1}));
    dup.households.push_back({"h9", "load", 0});
    CHECK(throws_with(dup, "duplicate assignment"));

    auto slack_hh = fixture::two_bus(fixture::diagonal({0.1, 0.1}), 0);
    slack_hh.households.push_back({"h1", "src", 1});
    CHECK(throws_with(slack_hh, "slack"));

    auto unknown = fixture::two_bus(fixture::diagonal({0.1, 0.1}));
    unknown.lines[0].to = "nowhere";
    CHECK(throws_with(unknown, "unknown bus"));
}

TEST_CASE("singular impedance blocks are rejected") {
    Matrix3c z = Matrix3c::Constant(Complex(0.1, 0.1));  // rank one
    CHECK(throws_with(fixture::two_bus(z), "singular"));
    Matrix3c zero = Matrix3c::Zero();
    CHECK(throws_with(fixture::two_bus(zero), "singular"));
}

TEST_CASE("admittance of a diagonal line") {
    const auto f = build_feeder(fixture::two_bus(fixture::diagonal({0.1, 0.1})));
    const auto adm = assemble_admittance(f);
    REQUIRE(adm.branches().size() == 1);
    const auto& y = adm.branches()[0].y_siemens;
    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(y(i, i) - Complex(5.0, -5.0)) < 1e-12);
        for (int j = 0; j < 3; ++j) {
            if (i != j) CHECK(std::abs(y(i, j)) < 1e-12);
        }
    }
}

TEST_CASE("Z times Y is the identity") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    const auto adm = assemble_admittance(f);
    const double zb = f.base().impedance_ohm();
    for (const auto& br : adm.branches()) {
        const Matrix3c zy_pu = br.z_pu * br.y_pu;
        CHECK((zy_pu - Matrix3c::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        const Matrix3c zy_si = (br.z_pu * zb) * br.y_siemens;
        CHECK((zy_si - Matrix3c::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    }
    CHECK(adm.sweep_order().front() == adm.slack_index());
    CHECK(adm.sweep_order().size() == 35);
}

TEST_CASE("write_feeder round trip is exact") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    std::ostringstream first;
    write_feeder(first, f);
    std::istringstream in(first.str());
    const auto g = build_feeder(parse_feeder(in, "<roundtrip>"));
    std::ostringstream second;
    write_feeder(second, g);
    CHECK(first.str() == second.str());
    REQUIRE(g.lines().size() == f.lines().size());
    for (std::size_t k = 0; k < f.lines().size(); ++k) CHECK(g.lines()[k].impedance_ohm == f.lines()[k].impedance_ohm);
}

TEST_CASE("line order does not change the power flow") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    auto desc = f.description();
    std::mt19937 rng(11);
    std::shuffle(desc.lines.begin(), desc.lines.end(), rng);
    const auto g = build_feeder(desc);

    auto inj = InjectionSet::zeros(f.buses().size());
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (std::size_t b = 1; b < f.buses().size(); ++b) {
        for (std::size_t s = 0; s < 3; ++s) inj.add(b, s, u(rng), 0.3 * u(rng));
    }
    const auto va = solve_power_flow(assemble_admittance(f), inj);
    const auto vb = solve_power_flow(assemble_admittance(g), inj);
    double worst = 0.0;
    for (std::size_t b = 0; b < f.buses().size(); ++b) {
        for (std::size_t s = 0; s < 3; ++s) worst = std::max(worst, std::abs(va.voltage_pu[b][s] - vb.voltage_pu[b][s]));
    }
    CHECK(worst <= 1e-12);
}
