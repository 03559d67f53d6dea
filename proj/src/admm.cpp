#include "doedr/admm.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "doedr/error.hpp"

namespace doedr {

void AdmmConfig::validate() const {
    if (!(rho > 0.0)) throw InputError(fmt::format("ADMM rho must be positive, got {}", rho));
    if (!(eps_prim > 0.0) || !(eps_dual > 0.0)) throw InputError("ADMM tolerances must be positive");
    if (max_iterations < 1) throw InputError("ADMM maxiter must be at least 1");
}

std::string_view to_string(InfeasibilitySource source) {
    switch (source) {
        case InfeasibilitySource::None: return "none";
        case InfeasibilitySource::Box: return "box";
        case InfeasibilitySource::Comfort: return "comfort";
        case InfeasibilitySource::Envelope: return "envelope";
    }
    return "unknown";
}

std::string_view to_string(StopReason reason) {
    return reason == StopReason::Converged ? "converged" : "maxiter";
}

PQ LocalProblemData::injection(double p_ac) const {
    return {pv_avail_kw - p_ac - ul_load_kw, pv_avail_kw * reactive_ratio(pf_pv) - p_ac * reactive_ratio(pf_ac) -
                                                 ul_load_kw * reactive_ratio(pf_ul)};
}

LocalProblemData make_local_problem(const HouseholdSpec& spec, const ThermalState& state, double t_out, double price,
                                    double pv_kw, double ul_kw, const HalfSpaceRep& envelope) {
    LocalProblemData d;
    d.household = spec.id;
    d.price = price;
    d.pv_avail_kw = pv_kw;
    d.ul_load_kw = ul_kw;
    d.ac_rating_kw = spec.ac_rating_kw;
    d.pf_ac = spec.pf_ac;
    d.pf_pv = spec.pf_pv;
    d.pf_ul = spec.pf_ul;
    d.envelope = envelope;
    d.comfort = comfort_power_interval(state, spec.thermal, t_out, spec.comfort, spec.ac_rating_kw);
    if (!d.comfort) {
        const double need_cool = power_for_temperature(state, spec.thermal, t_out, spec.comfort.hi);
        d.comfort_fallback_kw = need_cool > spec.ac_rating_kw ? spec.ac_rating_kw : 0.0;
    }
    return d;
}

std::optional<Interval> envelope_row_interval(const LocalProblemData& data, std::size_t row) {
    const auto& a = data.envelope.a[row];
    const double b = data.envelope.b[row];
    const PQ at_zero = data.injection(0.0);
    // a . inj(x) <= b  with inj(x) = inj(0) - x (1, tan_ac)  =>  -k x <= r
    const double k = a[0] + a[1] * reactive_ratio(data.pf_ac);
    const double r = b - (a[0] * at_zero.p + a[1] * at_zero.q);
    const Interval box{0.0, data.ac_rating_kw};
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (std::abs(k) < 1e-14) {
        if (r >= 0.0) return box;
        return std::nullopt;
    }
    const Interval allowed = k > 0.0 ? Interval{-r / k, inf} : Interval{-inf, r / -k};
    return intersect(allowed, box);
}

FeasibleInterval feasible_interval(const LocalProblemData& data) {
    if (data.ac_rating_kw < 0.0) return {std::nullopt, InfeasibilitySource::Box};
    if (!data.comfort) return {std::nullopt, InfeasibilitySource::Comfort};
    std::optional<Interval> acc = intersect(*data.comfort, Interval{0.0, data.ac_rating_kw});
    if (!acc) return {std::nullopt, InfeasibilitySource::Comfort};
    for (std::size_t i = 0; i < data.envelope.rows(); ++i) {
        const auto row = envelope_row_interval(data, i);
        if (row) acc = intersect(*acc, *row);
        if (!row || !acc) return {std::nullopt, InfeasibilitySource::Envelope};
    }
    return {acc, InfeasibilitySource::None};
}

ResolvedInterval resolve_interval(const LocalProblemData& data) {
    const FeasibleInterval strict = feasible_interval(data);
    if (strict.interval) return {*strict.interval, InfeasibilitySource::None, false, 0};
    if (strict.source != InfeasibilitySource::Envelope) {
        const double x = data.comfort_fallback_kw;
        return {{x, x}, strict.source, true, data.envelope.rows()};
    }
    // Keep only the rows compatible with comfort on their own.
    const Interval comfort = *data.comfort;
    Interval acc = comfort;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < data.envelope.rows(); ++i) {
        const auto row = envelope_row_interval(data, i);
        const auto with_comfort = row ? intersect(*row, comfort) : std::nullopt;
        if (!with_comfort) {
            ++dropped;
            continue;
        }
        const auto next = intersect(acc, *with_comfort);
        if (!next) {
            ++dropped;
            continue;
        }
        acc = *next;
    }
    return {acc, InfeasibilitySource::Envelope, true, dropped};
}

double local_solve(const Interval& feasible, double price, const AdmmSnapshot& s, const AdmmConfig& cfg) {
    const double c = s.p_ac - s.p_avg + s.p_shared - s.theta;
    return feasible.clamp(c - price / cfg.rho);
}

double local_solve(const LocalProblemData& data, const AdmmSnapshot& snapshot, const AdmmConfig& cfg) {
    return local_solve(resolve_interval(data).interval, data.price, snapshot, cfg);
}

double coordinator_update(double p_avg, double theta, double p_ref, std::size_t n, const AdmmConfig& cfg) {
    if (n < 1) throw InputError("coordinator needs at least one household");
    // Stationarity: 2n(nP - p_ref) + n rho (P - d) = 0.
    const double d = theta + p_avg;
    const double nn = static_cast<double>(n);
    return (2.0 * p_ref + cfg.rho * d) / (2.0 * nn + cfg.rho);
}

double dual_update(double theta, double p_avg, double p_shared) { return theta + (p_avg - p_shared); }

double AdmmResult::total() const { return std::accumulate(state.p_ac.begin(), state.p_ac.end(), 0.0); }

double AdmmResult::tracking_error() const { return std::abs(total() - p_ref); }

namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

AdmmResult admm_track(std::span<const Interval> intervals, std::span<const double> prices,
                      std::span<const double> warm_start, double p_ref, const AdmmConfig& cfg) {
    cfg.validate();
    const std::size_t n = intervals.size();
    if (n == 0) throw InputError("ADMM needs at least one household");
    if (prices.size() != n || warm_start.size() != n) throw InputError("ADMM inputs have mismatched sizes");

    AdmmResult out;
    out.p_ref = p_ref;
    AdmmState& st = out.state;
    st.p_ac.assign(warm_start.begin(), warm_start.end());
    st.p_avg = mean(st.p_ac);
    st.p_shared = p_ref / static_cast<double>(n);
    st.theta = 0.0;

    std::vector<double> next(n);
    while (st.iteration < cfg.max_iterations) {
        for (std::size_t h = 0; h < n; ++h) {
            next[h] = local_solve(intervals[h], prices[h], {st.p_ac[h], st.p_avg, st.p_shared, st.theta}, cfg);
        }
        const double avg = mean(next);
        const double shared = coordinator_update(avg, st.theta, p_ref, n, cfg);
        st.theta = dual_update(st.theta, avg, shared);
        st.dual_residual = shared - st.p_shared;
        st.p_ac = next;
        st.p_avg = avg;
        st.p_shared = shared;
        ++st.iteration;

        st.primal_residual.resize(n);
        double r2 = 0.0;
        for (std::size_t h = 0; h < n; ++h) {
            st.primal_residual[h] = st.p_ac[h] - st.p_shared;
            r2 += st.primal_residual[h] * st.primal_residual[h];
        }
        const double r_norm = std::sqrt(r2);
        const double s_norm = std::abs(st.dual_residual);
        out.primal_norm_history.push_back(r_norm);
        out.dual_norm_history.push_back(s_norm);
        if (r_norm <= cfg.eps_prim && s_norm <= cfg.eps_dual) {
            out.stop = StopReason::Converged;
            return out;
        }
    }
    out.stop = StopReason::MaxIterations;
    return out;
}

TrackResult admm_track(std::span<const LocalProblemData> households, std::span<const double> warm_start, double p_ref,
                       const AdmmConfig& cfg) {
    TrackResult out;
    std::vector<Interval> intervals;
    std::vector<double> prices;
    for (const auto& h : households) {
        out.intervals.push_back(resolve_interval(h));
        intervals.push_back(out.intervals.back().interval);
        prices.push_back(h.price);
    }
    out.admm = admm_track(intervals, prices, warm_start, p_ref, cfg);
    return out;
}

}  // namespace doedr
