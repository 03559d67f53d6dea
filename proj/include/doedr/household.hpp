#pragma once

#include <string>
#include <string_view>

#include "doedr/thermal.hpp"

namespace doedr {

enum class HouseholdClass { Doe, NonDoe, Passive };

std::string_view to_string(HouseholdClass cls);
HouseholdClass household_class_from_string(std::string_view text);

/// Static description of one customer connection.
struct HouseholdSpec {
    std::string id;
    HouseholdClass cls = HouseholdClass::Passive;
    double pv_rating_kw = 0.0;
    double ac_rating_kw = 0.0;  ///< controllable inverter AC (DOE class only)
    double pf_ac = 0.95;
    double pf_pv = 0.8;
    double pf_ul = 0.95;
    ThermalParams thermal;
    ComfortBand comfort;
    double import_limit_kw = 10.0;
    double export_limit_kw = 5.0;

    void validate() const;
};

/// tan(acos(pf)): reactive power per unit active power at a fixed power factor.
double reactive_ratio(double power_factor);

/// Extreme P/Q at the point of connection over the controllable AC range.
struct InjectionLimits {
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;
};

/// DOE customers span AC in [0, rating]; other classes collapse to a point.
/// Throws InputError for negative exogenous power or PV at a passive customer.
InjectionLimits injection_limits(const HouseholdSpec& spec, double pv_avail_kw, double ul_load_kw);

/// P/Q injection of a DOE customer at a given AC power.
PQ doe_injection(const HouseholdSpec& spec, double pv_avail_kw, double ul_load_kw, double p_ac_kw);

/// Fixed injection of a non-DOE or passive customer (AC folded into the load).
PQ fixed_injection(const HouseholdSpec& spec, double pv_avail_kw, double ul_load_kw);

struct StaticLimitResult {
    PQ injection;
    double pv_used_kw = 0.0;
    double curtailed_kw = 0.0;
    bool import_violation = false;  ///< logged only, never shed
};

/// Export limit enforced by PV curtailment with PV reactive power recomputed at
/// its power factor; imports beyond the limit are flagged. Non-DOE and passive only.
StaticLimitResult apply_static_limits(const HouseholdSpec& spec, double pv_avail_kw, double ul_load_kw);

}  // namespace doedr
