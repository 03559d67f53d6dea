#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "doedr/geometry.hpp"
#include "doedr/household.hpp"
#include "doedr/thermal.hpp"

namespace doedr {

struct AdmmConfig {
    double rho = 1.0;
    double eps_prim = 1e-3;
    double eps_dual = 1e-3;
    int max_iterations = 15;

    void validate() const;
};

/// Everything a household's local controller knows for one control step.
struct LocalProblemData {
    std::string household;
    double price = 0.0;  ///< objective weight on exported energy over the step
    double pv_avail_kw = 0.0;
    double ul_load_kw = 0.0;
    double ac_rating_kw = 0.0;
    double pf_ac = 0.95;
    double pf_pv = 0.8;
    double pf_ul = 0.95;
    std::optional<Interval> comfort;  ///< comfort-feasible AC power, already within the AC box
    /// AC power that keeps the next temperature closest to the band; used only
    /// when `comfort` is empty.
    double comfort_fallback_kw = 0.0;
    HalfSpaceRep envelope;

    /// P_inj and Q_inj at a given AC power (both affine in it).
    PQ injection(double p_ac) const;
};

/// Build local data from a household spec, its state and the step's inputs.
LocalProblemData make_local_problem(const HouseholdSpec& spec, const ThermalState& state, double t_out, double price,
                                    double pv_kw, double ul_kw, const HalfSpaceRep& envelope);

enum class InfeasibilitySource { None, Box, Comfort, Envelope };
std::string_view to_string(InfeasibilitySource source);

struct FeasibleInterval {
    std::optional<Interval> interval;
    InfeasibilitySource source = InfeasibilitySource::None;
};

/// Interval induced on AC power by one envelope row under the affine
/// injection maps; nullopt when the row excludes every AC power.
std::optional<Interval> envelope_row_interval(const LocalProblemData& data, std::size_t row);

/// Box intersect comfort intersect every envelope row.
FeasibleInterval feasible_interval(const LocalProblemData& data);

/// Interval actually used by the local controller. When the strict
/// intersection is empty: comfort-infeasible steps dispatch the
/// least-violation point of the AC box; envelope conflicts drop the rows that
/// exclude the comfort interval.
struct ResolvedInterval {
    Interval interval;
    InfeasibilitySource conflict = InfeasibilitySource::None;
    bool fallback = false;
    std::size_t dropped_rows = 0;
};
ResolvedInterval resolve_interval(const LocalProblemData& data);

/// Iterate values a local controller receives at iteration nu.
struct AdmmSnapshot {
    double p_ac = 0.0;      ///< this household's previous iterate
    double p_avg = 0.0;     ///< average of all households' previous iterates
    double p_shared = 0.0;  ///< auxiliary shared variable
    double theta = 0.0;     ///< scaled dual
};

/// argmin price * P + rho/2 (P - c)^2 over the interval with
/// c = p_ac - p_avg + p_shared - theta.
double local_solve(const Interval& feasible, double price, const AdmmSnapshot& snapshot, const AdmmConfig& cfg);
double local_solve(const LocalProblemData& data, const AdmmSnapshot& snapshot, const AdmmConfig& cfg);

/// argmin (n P - p_ref)^2 + (n rho / 2)(P - theta - p_avg)^2.
double coordinator_update(double p_avg, double theta, double p_ref, std::size_t n, const AdmmConfig& cfg);

double dual_update(double theta, double p_avg, double p_shared);

enum class StopReason { Converged, MaxIterations };
std::string_view to_string(StopReason reason);

struct AdmmState {
    int iteration = 0;
    std::vector<double> p_ac;
    double p_avg = 0.0;
    double p_shared = 0.0;
    double theta = 0.0;
    std::vector<double> primal_residual;  ///< p_ac[h] - p_shared
    double dual_residual = 0.0;           ///< p_shared change over the iteration
};

struct AdmmResult {
    AdmmState state;
    std::vector<double> primal_norm_history;
    std::vector<double> dual_norm_history;
    StopReason stop = StopReason::MaxIterations;
    double p_ref = 0.0;

    const std::vector<double>& dispatch() const { return state.p_ac; }
    double total() const;
    double tracking_error() const;
};

/// Scaled-form ADMM for the sharing problem. Start: P = p_ref / n, theta = 0,
/// households at `warm_start`. Stops when both residual norms pass their
/// tolerances or at max_iterations.
AdmmResult admm_track(std::span<const Interval> intervals, std::span<const double> prices,
                      std::span<const double> warm_start, double p_ref, const AdmmConfig& cfg);

struct TrackResult {
    AdmmResult admm;
    std::vector<ResolvedInterval> intervals;
};

TrackResult admm_track(std::span<const LocalProblemData> households, std::span<const double> warm_start, double p_ref,
                       const AdmmConfig& cfg);

}  // namespace doedr
