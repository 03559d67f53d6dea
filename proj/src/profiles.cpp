#include "doedr/profiles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/rng.hpp"
#include "doedr/textconfig.hpp"

namespace doedr {

std::string_view to_string(SignalKind kind) {
    switch (kind) {
        case SignalKind::Pv: return "pv";
        case SignalKind::Ul: return "ul";
        case SignalKind::Price: return "price";
        case SignalKind::Tout: return "t_out";
        case SignalKind::Pref: return "p_ref";
    }
    return "unknown";
}

std::string_view unit_of(SignalKind kind) {
    switch (kind) {
        case SignalKind::Pv:
        case SignalKind::Ul:
        case SignalKind::Pref: return "kW";
        case SignalKind::Price: return "AUD/kWh";
        case SignalKind::Tout: return "degC";
    }
    return "";
}

double TimeSeriesProfile::at(long t) const {
    if (t < start_s || t >= end_s()) {
        throw InputError(fmt::format("{} profile has no sample at t={} (covers [{}, {}))", to_string(kind), t, start_s,
                                     end_s()));
    }
    return values[static_cast<std::size_t>((t - start_s) / step_s)];
}

double TimeSeriesProfile::mean_over(long t0, long t1) const {
    if (t0 < start_s || t1 > end_s() || t1 <= t0) {
        throw InputError(fmt::format("{} profile does not cover [{}, {})", to_string(kind), t0, t1));
    }
    const long first = (t0 - start_s + step_s - 1) / step_s;
    const long last = (t1 - start_s + step_s - 1) / step_s;  // exclusive
    double sum = 0.0;
    for (long i = first; i < last; ++i) sum += values[static_cast<std::size_t>(i)];
    return sum / static_cast<double>(last - first);
}

void TimeSeriesProfile::validate() const {
    if (step_s <= 0) throw InputError(fmt::format("{} profile step must be positive", to_string(kind)));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v)) {
            throw InputError(fmt::format("{} profile sample {} is not finite", to_string(kind), i));
        }
        if ((kind == SignalKind::Pv || kind == SignalKind::Ul) && v < 0.0) {
            throw InputError(fmt::format("{} profile sample at t={} is negative ({})", to_string(kind),
                                         start_s + step_s * static_cast<long>(i), v));
        }
    }
}

void ProfileSet::validate_coverage(long t0, long t1) const {
    auto check = [&](const TimeSeriesProfile& p, const std::string& who) {
        p.validate();
        if (p.start_s != start_s() || p.step_s != step_s() || p.values.size() != samples()) {
            throw InputError(fmt::format("profile {} is not on the common time grid", who));
        }
    };
    check(price, "price");
    check(t_out, "t_out");
    if (p_ref) check(*p_ref, "p_ref");
    for (std::size_t h = 0; h < households.size(); ++h) {
        check(pv[h], "pv:" + households[h]);
        check(ul[h], "ul:" + households[h]);
    }
    if (t0 < start_s() || t1 > price.end_s()) {
        throw InputError(fmt::format("profiles cover [{}, {}) but the study needs [{}, {})", format_clock(start_s()),
                                     format_clock(price.end_s()), format_clock(t0), format_clock(t1)));
    }
}

// ---------------------------------------------------------------------------
// File format

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        const auto a = cell.find_first_not_of(" \t\r");
        const auto b = cell.find_last_not_of(" \t\r");
        out.push_back(a == std::string::npos ? std::string{} : cell.substr(a, b - a + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct Column {
    SignalKind kind;
    std::string household;  // empty for shared signals
};

Column parse_header_cell(const std::string& cell, const std::string& where) {
    const auto open = cell.find('[');
    if (open == std::string::npos || cell.back() != ']') {
        throw ConfigError(fmt::format("{} column '{}' must be name[unit]", where, cell));
    }
    const std::string name = cell.substr(0, open);
    const std::string unit = cell.substr(open + 1, cell.size() - open - 2);
    const auto colon = name.find(':');
    const std::string kind_name = name.substr(0, colon);
    Column col{SignalKind::Pv, colon == std::string::npos ? std::string{} : name.substr(colon + 1)};
    static const std::map<std::string, SignalKind> kinds{{"pv", SignalKind::Pv},
                                                         {"ul", SignalKind::Ul},
                                                         {"price", SignalKind::Price},
                                                         {"t_out", SignalKind::Tout},
                                                         {"p_ref", SignalKind::Pref}};
    const auto it = kinds.find(kind_name);
    if (it == kinds.end()) throw ConfigError(fmt::format("{} unknown signal kind '{}'", where, kind_name));
    col.kind = it->second;
    const bool per_household = col.kind == SignalKind::Pv || col.kind == SignalKind::Ul;
    if (per_household == col.household.empty()) {
        throw ConfigError(fmt::format("{} column '{}': pv/ul need ':<household>', shared signals must not have one",
                                      where, cell));
    }
    if (unit != unit_of(col.kind)) {
        throw ConfigError(fmt::format("{} column '{}' has unit '{}', expected '{}'", where, cell, unit, unit_of(col.kind)));
    }
    return col;
}

}  // namespace

ProfileSet read_profiles(std::istream& in, std::span<const HouseholdSpec> roster, const std::string& source) {
    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    };
    if (!next_line()) throw ConfigError(fmt::format("{}: empty profile file", source));
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "time_s") {
        throw ConfigError(fmt::format("{}:{}: first column must be time_s", source, line_no));
    }
    std::vector<Column> columns;
    for (std::size_t c = 1; c < header.size(); ++c) {
        columns.push_back(parse_header_cell(header[c], fmt::format("{}:{}:", source, line_no)));
    }

    std::vector<long> times;
    std::vector<std::vector<double>> data(columns.size());
    while (next_line()) {
        const auto cells = split_csv(line);
        const auto where = fmt::format("{}:{}:", source, line_no);
        if (cells.size() != header.size()) {
            throw ConfigError(fmt::format("{} expected {} cells, got {}", where, header.size(), cells.size()));
        }
        times.push_back(parse_int(cells[0], where + " time_s"));
        for (std::size_t c = 0; c < columns.size(); ++c) data[c].push_back(parse_double(cells[c + 1], where));
    }
    if (times.size() < 2) throw ConfigError(fmt::format("{}: need at least two samples", source));
    const long step = times[1] - times[0];
    if (step <= 0) throw ConfigError(fmt::format("{}: timestamps must increase", source));
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (times[i] - times[i - 1] != step) {
            throw ConfigError(fmt::format("{}: gap in profile between t={} and t={} (step {} s)", source, times[i - 1],
                                          times[i], step));
        }
    }

    auto make = [&](SignalKind kind, std::vector<double> values) {
        return TimeSeriesProfile{kind, times[0], step, std::move(values)};
    };
    ProfileSet set;
    std::map<std::string, std::size_t> pv_col, ul_col;
    std::optional<std::size_t> price_col, tout_col, pref_col;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        auto claim = [&](auto& slot) {
            if (slot) throw ConfigError(fmt::format("{}: duplicate column '{}'", source, header[c + 1]));
            slot = c;
        };
        switch (col.kind) {
            case SignalKind::Pv:
                if (!pv_col.emplace(col.household, c).second) throw ConfigError(fmt::format("{}: duplicate column '{}'", source, header[c + 1]));
                break;
            case SignalKind::Ul:
                if (!ul_col.emplace(col.household, c).second) throw ConfigError(fmt::format("{}: duplicate column '{}'", source, header[c + 1]));
                break;
            case SignalKind::Price: claim(price_col); break;
            case SignalKind::Tout: claim(tout_col); break;
            case SignalKind::Pref: claim(pref_col); break;
        }
    }
    if (!price_col || !tout_col) throw ConfigError(fmt::format("{}: price and t_out columns are required", source));
    set.price = make(SignalKind::Price, data[*price_col]);
    set.t_out = make(SignalKind::Tout, data[*tout_col]);
    if (pref_col) set.p_ref = make(SignalKind::Pref, data[*pref_col]);
    for (const auto& h : roster) {
        set.households.push_back(h.id);
        const auto pv = pv_col.find(h.id);
        if (pv != pv_col.end()) {
            set.pv.push_back(make(SignalKind::Pv, data[pv->second]));
        } else if (h.cls == HouseholdClass::Passive) {
            set.pv.push_back(make(SignalKind::Pv, std::vector<double>(times.size(), 0.0)));
        } else {
            throw ConfigError(fmt::format("{}: missing pv column for household '{}'", source, h.id));
        }
        const auto ul = ul_col.find(h.id);
        if (ul == ul_col.end()) throw ConfigError(fmt::format("{}: missing ul column for household '{}'", source, h.id));
        set.ul.push_back(make(SignalKind::Ul, data[ul->second]));
    }
    set.validate_coverage(set.start_s(), set.price.end_s());
    return set;
}

ProfileSet read_profiles(const std::filesystem::path& path, std::span<const HouseholdSpec> roster) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open profile file '{}'", path.string()));
    return read_profiles(in, roster, path.string());
}

void write_profiles(std::ostream& out, const ProfileSet& set) {
    out << "time_s,price[AUD/kWh],t_out[degC]";
    if (set.p_ref) out << ",p_ref[kW]";
    for (const auto& h : set.households) out << ",pv:" << h << "[kW],ul:" << h << "[kW]";
    out << '\n';
    for (std::size_t i = 0; i < set.samples(); ++i) {
        out << set.start_s() + set.step_s() * static_cast<long>(i);
        out << fmt::format(",{},{}", set.price.values[i], set.t_out.values[i]);
        if (set.p_ref) out << fmt::format(",{}", set.p_ref->values[i]);
        for (std::size_t h = 0; h < set.households.size(); ++h) {
            out << fmt::format(",{},{}", set.pv[h].values[i], set.ul[h].values[i]);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Synthetic generators

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

enum StreamTag : std::uint64_t { kPvStream = 1, kUlStream = 2, kToutStream = 3, kPriceStream = 4, kRefStream = 5 };

/// Zero-mean unit-variance AR(1) path with correlation time tau_s.
std::vector<double> ar1_path(Rng& rng, std::size_t n, double step_s, double tau_s) {
    const double phi = std::exp(-step_s / tau_s);
    const double kick = std::sqrt(1.0 - phi * phi);
    std::vector<double> x(n);
    double v = rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = v;
        v = phi * v + kick * rng.normal();
    }
    return x;
}

double clear_sky(double t_h, const SyntheticSpec& spec) {
    if (t_h <= spec.sunrise_h || t_h >= spec.sunset_h) return 0.0;
    const double x = std::sin(std::numbers::pi * (t_h - spec.sunrise_h) / (spec.sunset_h - spec.sunrise_h));
    return std::pow(x, 1.3);
}

}  // namespace

ProfileSet synthesize_profiles(std::span<const HouseholdSpec> roster, const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.step_s <= 0 || spec.end_s <= spec.start_s) throw InputError("synthetic profile window is empty");
    const auto n = static_cast<std::size_t>((spec.end_s - spec.start_s + spec.step_s - 1) / spec.step_s);
    const double dt = static_cast<double>(spec.step_s);
    auto time_h = [&](std::size_t i) { return static_cast<double>(spec.start_s + spec.step_s * static_cast<long>(i)) / 3600.0; };

    ProfileSet set;
    set.price = {SignalKind::Price, spec.start_s, spec.step_s, std::vector<double>(n)};
    set.t_out = {SignalKind::Tout, spec.start_s, spec.step_s, std::vector<double>(n)};

    {
        Rng rng(derive_seed(seed, {kToutStream}));
        const auto noise = ar1_path(rng, n, dt, 1800.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double phase = 2.0 * std::numbers::pi * (time_h(i) - spec.t_out_peak_h) / 24.0;
            set.t_out.values[i] = spec.t_out_mean_c + spec.t_out_amplitude_c * std::cos(phase) + 0.3 * noise[i];
        }
    }
    {
        // Market prices settle on 5-min intervals.
        Rng rng(derive_seed(seed, {kPriceStream}));
        long block = -1;
        double value = spec.price_base;
        for (std::size_t i = 0; i < n; ++i) {
            const long t = spec.start_s + spec.step_s * static_cast<long>(i);
            if (t / 300 != block) {
                block = t / 300;
                value = std::max(0.0, spec.price_base + spec.price_spread * (2.0 * rng.uniform() - 1.0));
            }
            set.price.values[i] = value;
        }
    }

    for (const auto& h : roster) {
        set.households.push_back(h.id);
        const std::uint64_t id = fnv1a(h.id);

        TimeSeriesProfile pv{SignalKind::Pv, spec.start_s, spec.step_s, std::vector<double>(n, 0.0)};
        if (h.cls != HouseholdClass::Passive && h.pv_rating_kw > 0.0) {
            Rng rng(derive_seed(seed, {kPvStream, id}));
            const auto cloud = ar1_path(rng, n, dt, 600.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double attenuation = std::clamp(1.0 - 0.25 * std::max(0.0, cloud[i]), 0.4, 1.0);
                pv.values[i] = h.pv_rating_kw * spec.pv_derate * clear_sky(time_h(i), spec) * attenuation;
            }
        }
        set.pv.push_back(std::move(pv));

        TimeSeriesProfile ul{SignalKind::Ul, spec.start_s, spec.step_s, std::vector<double>(n, 0.0)};
        {
            Rng rng(derive_seed(seed, {kUlStream, id}));
            const double base = rng.uniform(0.3, 0.9);
            const auto noise = ar1_path(rng, n, dt, 300.0);
            double event_power = 0.0;
            long event_left = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (event_left <= 0 && rng.uniform() < dt / 3600.0 * 0.8) {
                    event_power = rng.uniform(0.8, 2.0);
                    event_left = static_cast<long>(rng.uniform(120.0, 600.0));
                }
                double load = base + 0.15 * noise[i] + (event_left > 0 ? event_power : 0.0);
                event_left -= spec.step_s;
                if (h.cls != HouseholdClass::Doe && h.ac_rating_kw > 0.0) {
                    // Uncontrolled AC holding the set-point.
                    const double hold = (set.t_out.values[i] - spec.ac_setpoint_c) / (h.thermal.cop * h.thermal.resistance);
                    load += std::clamp(hold, 0.0, h.ac_rating_kw);
                }
                ul.values[i] = std::max(0.0, load);
            }
        }
        set.ul.push_back(std::move(ul));
    }
    return set;
}

// ---------------------------------------------------------------------------
// Reference signal

std::string_view to_string(ReferenceShape shape) {
    switch (shape) {
        case ReferenceShape::Square: return "square";
        case ReferenceShape::Ramp: return "ramp";
        case ReferenceShape::Noise: return "noise";
    }
    return "unknown";
}

ReferenceShape reference_shape_from_string(std::string_view text) {
    if (text == "square") return ReferenceShape::Square;
    if (text == "ramp") return ReferenceShape::Ramp;
    if (text == "noise") return ReferenceShape::Noise;
    throw ConfigError(fmt::format("unknown reference shape '{}' (square, ramp, noise)", text));
}

std::vector<double> reference_modulation(const ReferenceSpec& spec, std::span<const long> times, std::uint64_t seed) {
    std::vector<double> u(times.size(), 0.0);
    if (times.empty()) return u;
    switch (spec.shape) {
        case ReferenceShape::Square: {
            const long half = std::max<long>(1, spec.period_s / 2);
            for (std::size_t i = 0; i < times.size(); ++i) u[i] = ((times[i] - times[0]) / half) % 2 == 0 ? -1.0 : 1.0;
            break;
        }
        case ReferenceShape::Ramp: {
            const double span = static_cast<double>(std::max<long>(1, spec.ramp_end_s - spec.ramp_start_s));
            for (std::size_t i = 0; i < times.size(); ++i) {
                const double x = static_cast<double>(times[i] - spec.ramp_start_s) / span;
                u[i] = std::clamp(2.0 * x - 1.0, -1.0, 1.0);
            }
            break;
        }
        case ReferenceShape::Noise: {
            Rng rng(derive_seed(seed, {kRefStream}));
            constexpr int kModes = 3;
            std::array<double, kModes> weight{}, period{}, phase{};
            double total = 0.0;
            for (int m = 0; m < kModes; ++m) {
                weight[m] = rng.uniform(0.5, 1.0);
                period[m] = rng.uniform(1200.0, 3600.0);
                phase[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
                total += weight[m];
            }
            for (std::size_t i = 0; i < times.size(); ++i) {
                double v = 0.0;
                for (int m = 0; m < kModes; ++m) {
                    v += weight[m] * std::sin(2.0 * std::numbers::pi * static_cast<double>(times[i]) / period[m] + phase[m]);
                }
                u[i] = std::clamp(v / total, -1.0, 1.0);
            }
            break;
        }
    }
    return u;
}

TimeSeriesProfile build_reference(const TimeSeriesProfile& baseline, const ReferenceSpec& spec, std::uint64_t seed) {
    if (!(spec.regulation_fraction >= 0.0 && spec.regulation_fraction <= 1.0)) {
        throw InputError(fmt::format("regulation fraction must lie in [0, 1], got {}", spec.regulation_fraction));
    }
    std::vector<long> times(baseline.values.size());
    for (std::size_t i = 0; i < times.size(); ++i) times[i] = baseline.start_s + baseline.step_s * static_cast<long>(i);
    const auto u = reference_modulation(spec, times, seed);
    TimeSeriesProfile ref{SignalKind::Pref, baseline.start_s, baseline.step_s, baseline.values};
    for (std::size_t i = 0; i < ref.values.size(); ++i) ref.values[i] *= 1.0 + spec.regulation_fraction * u[i];
    return ref;
}

TimeSeriesProfile thermostat_baseline(std::span<const HouseholdSpec> doe, std::span<const ThermalState> initial,
                                      const TimeSeriesProfile& t_out, double setpoint_c) {
    if (doe.size() != initial.size()) throw InputError("baseline needs one initial state per household");
    TimeSeriesProfile out{SignalKind::Pref, t_out.start_s, t_out.step_s, std::vector<double>(t_out.values.size(), 0.0)};
    std::vector<ThermalState> state(initial.begin(), initial.end());
    for (std::size_t k = 0; k < t_out.values.size(); ++k) {
        for (std::size_t h = 0; h < doe.size(); ++h) {
            const double hold = power_for_temperature(state[h], doe[h].thermal, t_out.values[k], setpoint_c);
            const double p = std::clamp(hold, 0.0, doe[h].ac_rating_kw);
            out.values[k] += p;
            state[h] = step_temperature(state[h], doe[h].thermal, t_out.values[k], p);
        }
    }
    return out;
}

}  // namespace doedr
