#include "doedr/thermal.hpp"

#include <cmath>

#include <fmt/format.h>

#include "doedr/error.hpp"

namespace doedr {

void ThermalParams::validate() const {
    if (!(resistance > 0.0 && capacitance > 0.0 && cop > 0.0 && dt_h > 0.0)) {
        throw InputError(fmt::format("thermal parameters must be positive (R={}, C={}, cop={}, dt={})", resistance,
                                     capacitance, cop, dt_h));
    }
}

double ThermalParams::decay() const { return std::exp(-dt_h / (resistance * capacitance)); }

ThermalState step_temperature(const ThermalState& state, const ThermalParams& params, double t_out, double p_ac_kw) {
    if (p_ac_kw < 0.0) throw InputError(fmt::format("AC power must be non-negative, got {}", p_ac_kw));
    const double a = params.decay();
    return {a * state.indoor_c + (1.0 - a) * (t_out - params.cop * params.resistance * p_ac_kw)};
}

double power_for_temperature(const ThermalState& state, const ThermalParams& params, double t_out, double target) {
    const double a = params.decay();
    // target = a T + (1 - a) T_out - (1 - a) cop R P
    return (a * state.indoor_c + (1.0 - a) * t_out - target) / ((1.0 - a) * params.cop * params.resistance);
}

std::optional<Interval> comfort_power_interval(const ThermalState& state, const ThermalParams& params, double t_out,
                                               const ComfortBand& band, double p_max) {
    // T' decreases in P: the warm edge of the band bounds P from below.
    const Interval needed{power_for_temperature(state, params, t_out, band.hi),
                          power_for_temperature(state, params, t_out, band.lo)};
    return intersect(needed, Interval{0.0, p_max});
}

}  // namespace doedr
