#include "doedr/powerflow.hpp"

#include <cmath>

#include <fmt/format.h>

#include "doedr/error.hpp"

namespace doedr {

namespace {

using Vec3 = Eigen::Vector3cd;

Vec3 to_vec(const std::array<Complex, 3>& a) { return Vec3(a[0], a[1], a[2]); }

double kw_to_pu(const AdmittanceModel& adm) { return 1000.0 / adm.base().power_va; }

}  // namespace

InjectionSet InjectionSet::zeros(std::size_t bus_count) {
    InjectionSet inj;
    inj.p_kw.assign(bus_count, {0.0, 0.0, 0.0});
    inj.q_kvar.assign(bus_count, {0.0, 0.0, 0.0});
    return inj;
}

NodalPower nodal_power(const AdmittanceModel& adm, const std::vector<std::array<Complex, 3>>& v) {
    const std::size_t n = adm.bus_count();
    // Nodal current I_i = sum_k Y_ik V_k, accumulated per line block split into G and B.
    std::vector<std::array<double, 3>> i_re(n, {0.0, 0.0, 0.0});
    std::vector<std::array<double, 3>> i_im(n, {0.0, 0.0, 0.0});
    for (const auto& br : adm.branches()) {
        for (std::size_t s = 0; s < kPhases; ++s) {
            for (std::size_t g = 0; g < kPhases; ++g) {
                const double G = br.y_pu(s, g).real();
                const double B = br.y_pu(s, g).imag();
                const Complex dv_from = v[br.from][g] - v[br.to][g];
                i_re[br.from][s] += G * dv_from.real() - B * dv_from.imag();
                i_im[br.from][s] += G * dv_from.imag() + B * dv_from.real();
                i_re[br.to][s] -= G * dv_from.real() - B * dv_from.imag();
                i_im[br.to][s] -= G * dv_from.imag() + B * dv_from.real();
            }
        }
    }
    NodalPower out;
    out.p_pu.assign(n, {0.0, 0.0, 0.0});
    out.q_pu.assign(n, {0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < kPhases; ++s) {
            const double vr = v[i][s].real();
            const double vi = v[i][s].imag();
            out.p_pu[i][s] = vr * i_re[i][s] + vi * i_im[i][s];
            out.q_pu[i][s] = vi * i_re[i][s] - vr * i_im[i][s];
        }
    }
    return out;
}

double max_power_mismatch(const AdmittanceModel& adm, const InjectionSet& inj,
                          const std::vector<std::array<Complex, 3>>& v) {
    const NodalPower calc = nodal_power(adm, v);
    const double to_pu = kw_to_pu(adm);
    double worst = 0.0;
    for (std::size_t i = 0; i < adm.bus_count(); ++i) {
        if (i == adm.slack_index()) continue;
        for (std::size_t s = 0; s < kPhases; ++s) {
            worst = std::max(worst, std::abs(calc.p_pu[i][s] - inj.p_kw[i][s] * to_pu));
            worst = std::max(worst, std::abs(calc.q_pu[i][s] - inj.q_kvar[i][s] * to_pu));
        }
    }
    return worst;
}

VoltageSolution solve_power_flow(const AdmittanceModel& adm, const InjectionSet& inj, const SolverOptions& options) {
    const std::size_t n = adm.bus_count();
    if (inj.p_kw.size() != n || inj.q_kvar.size() != n) {
        throw InputError(fmt::format("injection set covers {} buses, feeder has {}", inj.p_kw.size(), n));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < kPhases; ++s) {
            if (!std::isfinite(inj.p_kw[i][s]) || !std::isfinite(inj.q_kvar[i][s])) {
                throw InputError(fmt::format("non-finite injection at bus index {} phase {}", i, phase_letter(s)));
            }
            if (i == adm.slack_index() && (inj.p_kw[i][s] != 0.0 || inj.q_kvar[i][s] != 0.0)) {
                throw InputError("injections at the slack bus are not allowed");
            }
        }
    }

    VoltageSolution sol;
    sol.voltage_pu.assign(n, adm.slack_voltage());
    const double to_pu = kw_to_pu(adm);
    std::vector<Vec3> power(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t s = 0; s < kPhases; ++s) power[i](s) = Complex(inj.p_kw[i][s], inj.q_kvar[i][s]) * to_pu;
    }

    const auto& order = adm.sweep_order();
    std::vector<Vec3> downstream(n);
    for (int it = 0;; ++it) {
        const double mismatch = max_power_mismatch(adm, inj, sol.voltage_pu);
        if (options.record_history) sol.residual_history.push_back(mismatch);
        sol.iterations = it;
        sol.max_mismatch_pu = mismatch;
        if (mismatch < options.tolerance_pu) return sol;
        if (it >= options.max_iterations || !std::isfinite(mismatch)) {
            throw ConvergenceError(
                fmt::format("load flow did not converge in {} iterations (mismatch {:.3e} pu)", it, mismatch),
                mismatch, it);
        }

        // Backward: current drawn by each subtree (load current is -conj(S/V)).
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t s = 0; s < kPhases; ++s) {
                downstream[i](s) = -std::conj(power[i](s) / sol.voltage_pu[i][s]);
            }
        }
        for (auto it_bus = order.rbegin(); it_bus != order.rend(); ++it_bus) {
            const std::size_t bus = *it_bus;
            if (bus == adm.slack_index()) continue;
            downstream[adm.branches()[adm.feeding_branch(bus)].from] += downstream[bus];
        }
        // Forward: voltage drop along each branch.
        for (const std::size_t bus : order) {
            if (bus == adm.slack_index()) continue;
            const auto& br = adm.branches()[adm.feeding_branch(bus)];
            const Vec3 v = to_vec(sol.voltage_pu[br.from]) - br.z_pu * downstream[bus];
            for (std::size_t s = 0; s < kPhases; ++s) sol.voltage_pu[bus][s] = v(s);
        }
    }
}

std::vector<VoltageViolation> check_limits(const VoltageSolution& solution, double v_lo, double v_hi) {
    std::vector<VoltageViolation> out;
    for (std::size_t i = 0; i < solution.voltage_pu.size(); ++i) {
        for (std::size_t s = 0; s < kPhases; ++s) {
            const double m = solution.magnitude(i, s);
            if (m < v_lo) out.push_back({i, s, m, VoltageViolation::Kind::Under});
            else if (m > v_hi) out.push_back({i, s, m, VoltageViolation::Kind::Over});
        }
    }
    return out;
}

}  // namespace doedr
