#include "doedr/household.hpp"

#include <cmath>

#include <fmt/format.h>

#include "doedr/error.hpp"

namespace doedr {

std::string_view to_string(HouseholdClass cls) {
    switch (cls) {
        case HouseholdClass::Doe: return "doe";
        case HouseholdClass::NonDoe: return "non_doe";
        case HouseholdClass::Passive: return "passive";
    }
    return "unknown";
}

HouseholdClass household_class_from_string(std::string_view text) {
    if (text == "doe") return HouseholdClass::Doe;
    if (text == "non_doe") return HouseholdClass::NonDoe;
    if (text == "passive") return HouseholdClass::Passive;
    throw InputError(fmt::format("unknown household class '{}'", text));
}

void HouseholdSpec::validate() const {
    auto pf_ok = [](double pf) { return pf > 0.0 && pf <= 1.0; };
    if (!pf_ok(pf_ac) || !pf_ok(pf_pv) || !pf_ok(pf_ul)) {
        throw InputError(fmt::format("household '{}': power factors must lie in (0, 1]", id));
    }
    if (ac_rating_kw < 0.0 || pv_rating_kw < 0.0) {
        throw InputError(fmt::format("household '{}': ratings must be non-negative", id));
    }
    if (!(comfort.lo < comfort.hi)) throw InputError(fmt::format("household '{}': empty comfort band", id));
    thermal.validate();
}

double reactive_ratio(double power_factor) { return std::tan(std::acos(power_factor)); }

namespace {

void check_exogenous(const HouseholdSpec& spec, double pv, double ul) {
    if (!(pv >= 0.0) || !(ul >= 0.0)) {
        throw InputError(fmt::format("household '{}': PV and load must be non-negative (pv={}, ul={})", spec.id, pv, ul));
    }
    if (spec.cls == HouseholdClass::Passive && pv != 0.0) {
        throw InputError(fmt::format("household '{}': passive customers have no PV", spec.id));
    }
}

}  // namespace

PQ doe_injection(const HouseholdSpec& spec, double pv, double ul, double p_ac) {
    return {pv - p_ac - ul, pv * reactive_ratio(spec.pf_pv) - p_ac * reactive_ratio(spec.pf_ac) -
                                ul * reactive_ratio(spec.pf_ul)};
}

PQ fixed_injection(const HouseholdSpec& spec, double pv, double ul) {
    check_exogenous(spec, pv, ul);
    return {pv - ul, pv * reactive_ratio(spec.pf_pv) - ul * reactive_ratio(spec.pf_ul)};
}

InjectionLimits injection_limits(const HouseholdSpec& spec, double pv, double ul) {
    check_exogenous(spec, pv, ul);
    if (spec.cls != HouseholdClass::Doe) {
        const PQ x = fixed_injection(spec, pv, ul);
        return {x.p, x.p, x.q, x.q};
    }
    const PQ ac_off = doe_injection(spec, pv, ul, 0.0);
    const PQ ac_full = doe_injection(spec, pv, ul, spec.ac_rating_kw);
    return {ac_full.p, ac_off.p, ac_full.q, ac_off.q};
}

StaticLimitResult apply_static_limits(const HouseholdSpec& spec, double pv, double ul) {
    if (spec.cls == HouseholdClass::Doe) {
        throw InputError(fmt::format("household '{}': static limits apply to non-DOE and passive customers", spec.id));
    }
    StaticLimitResult out;
    out.pv_used_kw = pv;
    out.injection = fixed_injection(spec, pv, ul);
    if (out.injection.p > spec.export_limit_kw) {
        out.curtailed_kw = out.injection.p - spec.export_limit_kw;
        out.pv_used_kw = pv - out.curtailed_kw;
        out.injection = {spec.export_limit_kw, out.pv_used_kw * reactive_ratio(spec.pf_pv) - ul * reactive_ratio(spec.pf_ul)};
    }
    out.import_violation = out.injection.p < -spec.import_limit_kw;
    return out;
}

}  // namespace doedr
