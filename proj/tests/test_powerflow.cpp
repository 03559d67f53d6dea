#include <doctest.h>

#include <cmath>
#include <random>

#include "doedr/error.hpp"
#include "doedr/powerflow.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace doedr;

namespace {

const std::string kData = DOEDR_DATA_DIR;

// 0.05 + j0.05 pu on a 0.529 ohm base
FeederModel two_bus_pu(double r_pu, double x_pu) {
    const double zb = BaseValues{}.impedance_ohm();
    return build_feeder(fixture::two_bus(fixture::diagonal({r_pu * zb, x_pu * zb})));
}

InjectionSet per_phase(const FeederModel& f, double p_kw, double q_kvar) {
    auto inj = InjectionSet::zeros(f.buses().size());
    for (std::size_t s = 0; s < 3; ++s) inj.add(1, s, p_kw, q_kvar);
    return inj;
}

}  // namespace

TEST_CASE("zero injection returns the slack voltage") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    const auto adm = assemble_admittance(f);
    const auto sol = solve_power_flow(adm, InjectionSet::zeros(f.buses().size()));
    CHECK(sol.iterations <= 2);
    for (std::size_t b = 0; b < f.buses().size(); ++b) {
        for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(sol.voltage_pu[b][s] - adm.slack_voltage()[s]) < 1e-12);
    }
}

TEST_CASE("two-bus load matches the closed-form receiving voltage") {
    const auto f = two_bus_pu(0.05, 0.05);
    // -0.1 pu and -0.05 pu per phase on a 100 kVA base
    const auto sol = solve_power_flow(assemble_admittance(f), per_phase(f, -10.0, -5.0));
    const double expected = oracle::two_bus_voltage(0.05, 0.05, 0.1, 0.05);
    for (std::size_t s = 0; s < 3; ++s) CHECK(sol.magnitude(1, s) == doctest::Approx(expected).epsilon(1e-8));
    CHECK(std::abs(sol.magnitude(1, 0) - expected) < 1e-8);
}

TEST_CASE("receiving voltage falls as load grows and rises with export") {
    const auto f = two_bus_pu(0.05, 0.05);
    const auto adm = assemble_admittance(f);
    double prev = 2.0;
    for (double load = 0.0; load <= 40.0; load += 5.0) {
        const double v = solve_power_flow(adm, per_phase(f, -load, -0.3 * load)).magnitude(1, 0);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(solve_power_flow(adm, per_phase(f, 10.0, 0.0)).magnitude(1, 0) > 1.0);
}

TEST_CASE("balanced injections give symmetric phases") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    auto inj = InjectionSet::zeros(f.buses().size());
    for (std::size_t b = 1; b < f.buses().size(); ++b) {
        for (std::size_t s = 0; s < 3; ++s) inj.add(b, s, -1.5, -0.4);
    }
    const auto sol = solve_power_flow(assemble_admittance(f), inj);
    for (std::size_t b = 0; b < f.buses().size(); ++b) {
        CHECK(std::abs(sol.magnitude(b, 0) - sol.magnitude(b, 1)) < 1e-10);
        CHECK(std::abs(sol.magnitude(b, 0) - sol.magnitude(b, 2)) < 1e-10);
    }
}

TEST_CASE("converged solution satisfies the dense nodal equations") {
    const auto f = load_feeder(kData + "/feeder_34bus.cfg");
    const auto adm = assemble_admittance(f);
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto inj = InjectionSet::zeros(f.buses().size());
        for (std::size_t b = 1; b < f.buses().size(); ++b) {
            for (std::size_t s = 0; s < 3; ++s) inj.add(b, s, u(rng), 0.4 * u(rng));
        }
        SolverOptions opt;
        opt.record_history = true;
        const auto sol = solve_power_flow(adm, inj, opt);
        CHECK(sol.max_mismatch_pu < 1e-8);
        CHECK(oracle::dense_mismatch(f, inj, sol.voltage_pu) < 1e-6);
        CHECK(sol.residual_history.size() == static_cast<std::size_t>(sol.iterations + 1));
    }
}

TEST_CASE("limit check reports both sides") {
    VoltageSolution sol;
    sol.voltage_pu = {{Complex(1.0, 0), Complex(0.93, 0), Complex(1.2, 0)}, {Complex(0.94, 0), Complex(1.1, 0), Complex(1.0, 0)}};
    const auto v = check_limits(sol, 0.94, 1.10);
    REQUIRE(v.size() == 2);
    CHECK(v[0].bus == 0);
    CHECK(v[0].phase == 1);
    CHECK(v[0].kind == VoltageViolation::Kind::Under);
    CHECK(v[1].phase == 2);
    CHECK(v[1].kind == VoltageViolation::Kind::Over);
}

TEST_CASE("bad injections and divergence raise") {
    const auto f = two_bus_pu(0.05, 0.05);
    const auto adm = assemble_admittance(f);
    auto nan = per_phase(f, 0.0, 0.0);
    nan.p_kw[1][2] = std::nan("");
    CHECK_THROWS_AS(solve_power_flow(adm, nan), InputError);

    auto at_slack = per_phase(f, 0.0, 0.0);
    at_slack.p_kw[0][0] = 1.0;
    CHECK_THROWS_AS(solve_power_flow(adm, at_slack), InputError);

    CHECK_THROWS_AS(solve_power_flow(adm, InjectionSet::zeros(5)), InputError);

    // beyond the loadability limit of the line
    REQUIRE(std::isnan(oracle::two_bus_voltage(0.05, 0.05, 5.0, 0.0)));
    try {
        solve_power_flow(adm, per_phase(f, -500.0, 0.0));
        FAIL("expected divergence");
    } catch (const ConvergenceError& e) {
        CHECK(e.iterations() <= 100);
        CHECK(e.last_residual() > 1e-8);
    }
}
