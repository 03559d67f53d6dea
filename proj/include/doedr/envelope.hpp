#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "doedr/feeder.hpp"
#include "doedr/geometry.hpp"
#include "doedr/household.hpp"
#include "doedr/powerflow.hpp"

namespace doedr {

/// Axis-aligned P-Q rectangle spanned by the injection limits.
struct Box {
    double p_min = 0.0;
    double p_max = 0.0;
    double q_min = 0.0;
    double q_max = 0.0;

    bool is_point() const { return p_min == p_max && q_min == q_max; }
    bool contains(const PQ& x, double tol = 0.0) const {
        return x.p >= p_min - tol && x.p <= p_max + tol && x.q >= q_min - tol && x.q <= q_max + tol;
    }
    /// Counter-clockwise from (p_min, q_min); coincident corners are kept.
    std::array<PQ, 4> corners() const {
        return {PQ{p_min, q_min}, PQ{p_max, q_min}, PQ{p_max, q_max}, PQ{p_min, q_max}};
    }
};

Box bounding_box(const InjectionLimits& limits);

/// Region a household's injection is drawn from; fixed regions repeat their
/// lower corner in every scenario.
struct SamplingRegion {
    Box box;
    bool sampled = false;
};

/// scenarios x households matrix of injections, row-major by scenario.
struct ScenarioBatch {
    std::size_t scenarios = 0;
    std::size_t households = 0;
    std::vector<PQ> points;

    const PQ& at(std::size_t scenario, std::size_t household) const { return points[scenario * households + household]; }
};

/// Independent uniform P and Q per sampled household, drawn scenario by
/// scenario in household order from one seeded stream.
ScenarioBatch sample_scenarios(std::span<const SamplingRegion> regions, std::size_t n, std::uint64_t seed);

/// (bus index, phase) of each household column of a batch.
struct NodeRef {
    std::size_t bus = 0;
    std::size_t phase = 0;
};

struct FeasibleSet {
    std::vector<std::size_t> households;          ///< batch columns tracked (DOE customers)
    std::vector<std::vector<PQ>> points;          ///< feasible pairs per tracked household
    std::vector<bool> scenario_feasible;          ///< per scenario
    std::size_t sampled = 0;
    std::size_t feasible = 0;
    std::size_t divergent = 0;
    std::size_t violating = 0;
};

/// One network-wide load flow per scenario; a scenario contributes its pair to
/// every tracked household when it converges with no limit violation.
/// Divergent scenarios are counted, not fatal. Throws EnvelopeError naming
/// the first tracked household when nothing survives.
FeasibleSet feasible_set(const AdmittanceModel& adm, std::span<const NodeRef> nodes, const ScenarioBatch& batch,
                         std::span<const std::size_t> tracked, std::span<const std::string> tracked_ids,
                         const VoltageBand& band, const SolverOptions& solver = {});

/// One household's operating envelope for one control step.
struct EnvelopePolytope {
    std::string household;
    int step = 0;
    long time_s = 0;
    std::vector<PQ> vertices;  ///< counter-clockwise
    HalfSpaceRep halfspace;
    std::size_t sampled = 0;
    std::size_t feasible = 0;

    bool degenerate() const { return halfspace.degenerate; }
    bool contains(const PQ& x, double tol = 1e-9) const { return halfspace.contains(x, tol); }
};

/// Hull + half-space form of a household's feasible pairs. Fewer than three
/// pairs fall back to the degenerate box around them.
EnvelopePolytope make_envelope(std::string household, std::span<const PQ> feasible_points);

/// Exogenous state of one household over the step being enveloped.
struct HouseholdInputs {
    double pv_kw = 0.0;
    double ul_kw = 0.0;
};

struct EnvelopeRequest {
    int step = 0;
    long time_s = 0;
    std::size_t scenarios = 500;
    std::uint64_t seed = 0;
    VoltageBand band;
    SolverOptions solver;
    bool keep_samples = false;
};

struct EnvelopeResult {
    std::vector<EnvelopePolytope> envelopes;  ///< DOE customers in roster order
    std::vector<std::size_t> doe_households;  ///< roster index of each envelope
    std::vector<InjectionLimits> limits;      ///< per roster household
    FeasibleSet feasible;
    ScenarioBatch samples;  ///< only when keep_samples
    std::vector<std::string> warnings;
};

/// Full Stage-I pipeline for one control step. `households` and `inputs` are
/// parallel to the roster; each roster id must be connected in the feeder.
EnvelopeResult build_envelopes(const FeederModel& feeder, const AdmittanceModel& adm,
                               std::span<const HouseholdSpec> households, std::span<const HouseholdInputs> inputs,
                               const EnvelopeRequest& request);

/// Roster -> (bus index, phase); throws ConfigError for an unconnected id.
std::vector<NodeRef> connection_nodes(const FeederModel& feeder, std::span<const HouseholdSpec> households);

/// Build the nodal injection set for one assignment of roster injections.
InjectionSet nodal_injections(std::size_t bus_count, std::span<const NodeRef> nodes, std::span<const PQ> injections);

}  // namespace doedr
