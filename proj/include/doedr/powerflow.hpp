#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "doedr/feeder.hpp"
#include "doedr/types.hpp"

namespace doedr {

/// Net injection per (bus, phase), kW and kvar, export positive.
struct InjectionSet {
    std::vector<std::array<double, 3>> p_kw;
    std::vector<std::array<double, 3>> q_kvar;

    static InjectionSet zeros(std::size_t bus_count);
    void add(std::size_t bus, std::size_t phase, double p, double q) {
        p_kw[bus][phase] += p;
        q_kvar[bus][phase] += q;
    }
    std::size_t bus_count() const { return p_kw.size(); }
};

struct VoltageSolution {
    std::vector<std::array<Complex, 3>> voltage_pu;
    int iterations = 0;
    double max_mismatch_pu = 0.0;
    std::vector<double> residual_history;  ///< filled when requested

    double magnitude(std::size_t bus, std::size_t phase) const { return std::abs(voltage_pu[bus][phase]); }
};

struct SolverOptions {
    double tolerance_pu = 1e-8;
    int max_iterations = 100;
    bool record_history = false;
};

/// Backward/forward sweep on the radial tree. Converged when every P and Q
/// mismatch of the nodal power equations is below tolerance_pu. Throws
/// ConvergenceError carrying the last residual, InputError on non-finite or
/// slack-bus injections.
VoltageSolution solve_power_flow(const AdmittanceModel& adm, const InjectionSet& injections,
                                 const SolverOptions& options = {});

/// P and Q (pu) injected into the network at every (bus, phase), evaluated from
/// the conductance/susceptance blocks with the real-form nodal power equations.
struct NodalPower {
    std::vector<std::array<double, 3>> p_pu;
    std::vector<std::array<double, 3>> q_pu;
};
NodalPower nodal_power(const AdmittanceModel& adm, const std::vector<std::array<Complex, 3>>& voltage_pu);

/// Largest |P_calc - P_spec| or |Q_calc - Q_spec| in pu over non-slack nodes.
double max_power_mismatch(const AdmittanceModel& adm, const InjectionSet& injections,
                          const std::vector<std::array<Complex, 3>>& voltage_pu);

struct VoltageViolation {
    enum class Kind { Under, Over };
    std::size_t bus = 0;
    std::size_t phase = 0;
    double magnitude_pu = 0.0;
    Kind kind = Kind::Under;
};

std::vector<VoltageViolation> check_limits(const VoltageSolution& solution, double v_lo, double v_hi);

struct VoltageBand {
    double lo = 0.94;
    double hi = 1.10;
};

}  // namespace doedr
