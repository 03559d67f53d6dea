#pragma once

#include <optional>

#include "doedr/types.hpp"

namespace doedr {

/// First-order equivalent thermal parameters of a conditioned space.
struct ThermalParams {
    double resistance = 2.0;   ///< degC/kW
    double capacitance = 2.0;  ///< kWh/degC
    double cop = 2.5;          ///< cooling coefficient of performance
    double dt_h = 5.0 / 60.0;  ///< control step, hours

    void validate() const;
    /// exp(-dt / (R C))
    double decay() const;
};

struct ThermalState {
    double indoor_c = 23.0;
};

struct ComfortBand {
    double lo = 22.0;
    double hi = 24.0;

    bool contains(double t, double tol = 0.0) const { return t >= lo - tol && t <= hi + tol; }
};

/// T' = a T + (1 - a)(T_out - cop R P), a = exp(-dt / (R C)). Outdoor
/// temperature is held over the step. Throws InputError for P < 0.
ThermalState step_temperature(const ThermalState& state, const ThermalParams& params, double t_out, double p_ac_kw);

/// AC power that lands the next indoor temperature exactly on `target`
/// (unclamped; may be negative or above rating).
double power_for_temperature(const ThermalState& state, const ThermalParams& params, double t_out, double target);

/// Powers in [0, p_max] whose next temperature lies in the band; nullopt when none.
std::optional<Interval> comfort_power_interval(const ThermalState& state, const ThermalParams& params, double t_out,
                                               const ComfortBand& band, double p_max);

}  // namespace doedr
