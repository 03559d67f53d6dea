#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doedr/household.hpp"

namespace doedr {

enum class SignalKind { Pv, Ul, Price, Tout, Pref };

std::string_view to_string(SignalKind kind);
std::string_view unit_of(SignalKind kind);

/// Uniformly sampled signal; sample i covers [start + i step, start + (i+1) step).
struct TimeSeriesProfile {
    SignalKind kind = SignalKind::Pv;
    long start_s = 0;
    long step_s = 30;
    std::vector<double> values;

    long end_s() const { return start_s + step_s * static_cast<long>(values.size()); }
    /// Sample covering time t; throws InputError outside coverage.
    double at(long t) const;
    /// Mean of the samples covering [t0, t1).
    double mean_over(long t0, long t1) const;
    void validate() const;
};

/// Exogenous inputs of a study at grid cadence.
struct ProfileSet {
    std::vector<std::string> households;  ///< roster order
    std::vector<TimeSeriesProfile> pv;
    std::vector<TimeSeriesProfile> ul;
    TimeSeriesProfile price;  ///< AUD/kWh
    TimeSeriesProfile t_out;  ///< degC
    std::optional<TimeSeriesProfile> p_ref;

    long start_s() const { return price.start_s; }
    long step_s() const { return price.step_s; }
    std::size_t samples() const { return price.values.size(); }

    /// Throws InputError unless every signal shares one grid and covers [t0, t1).
    void validate_coverage(long t0, long t1) const;
};

/// Delimited profile file: header `time_s,price[AUD/kWh],t_out[degC],pv:<id>[kW],ul:<id>[kW],...`
/// with an optional `p_ref[kW]` column; one row per timestamp. PV columns may
/// be omitted for passive customers.
ProfileSet read_profiles(std::istream& in, std::span<const HouseholdSpec> roster, const std::string& source = "<stream>");
ProfileSet read_profiles(const std::filesystem::path& path, std::span<const HouseholdSpec> roster);
void write_profiles(std::ostream& out, const ProfileSet& profiles);

struct SyntheticSpec {
    long start_s = 10 * 3600;
    long end_s = 12 * 3600 + 300;  ///< exclusive
    long step_s = 30;
    double sunrise_h = 6.0;
    double sunset_h = 19.0;
    double pv_derate = 0.85;
    double t_out_mean_c = 26.0;
    double t_out_amplitude_c = 5.0;
    double t_out_peak_h = 14.5;
    double price_base = 0.06;   ///< AUD/kWh
    double price_spread = 0.03; ///< +- around base, per 5-min interval
    double ac_setpoint_c = 23.0;  ///< uncontrolled AC in non-DOE/passive loads
};

/// Smooth PV bell curves with seeded cloud attenuation, stochastic household
/// load (non-DOE and passive loads include their uncontrolled AC), diurnal
/// outdoor temperature and a 5-min stepped price. Pure function of (roster, spec, seed).
ProfileSet synthesize_profiles(std::span<const HouseholdSpec> roster, const SyntheticSpec& spec, std::uint64_t seed);

enum class ReferenceShape { Square, Ramp, Noise };
std::string_view to_string(ReferenceShape shape);
ReferenceShape reference_shape_from_string(std::string_view text);

struct ReferenceSpec {
    ReferenceShape shape = ReferenceShape::Noise;
    double regulation_fraction = 0.2;
    long period_s = 1800;                ///< square wave period
    long ramp_start_s = 10 * 3600 + 2700;  ///< 10:45
    long ramp_end_s = 11 * 3600;
};

/// Modulation u(t) in [-1, 1] at the given sample start times.
std::vector<double> reference_modulation(const ReferenceSpec& spec, std::span<const long> times, std::uint64_t seed);

/// p_ref(t) = baseline(t) (1 + fraction u(t)); throws InputError for a fraction outside [0, 1].
TimeSeriesProfile build_reference(const TimeSeriesProfile& baseline, const ReferenceSpec& spec, std::uint64_t seed);

/// Aggregate AC power of DOE customers when each thermostat holds `setpoint_c`
/// (clamped to the AC rating), simulated step by step from `initial`.
/// `t_out` is given per control step.
TimeSeriesProfile thermostat_baseline(std::span<const HouseholdSpec> doe, std::span<const ThermalState> initial,
                                      const TimeSeriesProfile& t_out, double setpoint_c);

}  // namespace doedr
