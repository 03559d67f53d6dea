#include "doedr/envelope.hpp"

#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/rng.hpp"

namespace doedr {

Box bounding_box(const InjectionLimits& limits) { return {limits.p_min, limits.p_max, limits.q_min, limits.q_max}; }

ScenarioBatch sample_scenarios(std::span<const SamplingRegion> regions, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw InputError("scenario count must be at least 1");
    ScenarioBatch batch;
    batch.scenarios = n;
    batch.households = regions.size();
    batch.points.reserve(n * regions.size());
    Rng rng(seed);
    for (std::size_t w = 0; w < n; ++w) {
        for (const auto& r : regions) {
            if (!r.sampled) {
                batch.points.push_back({r.box.p_min, r.box.q_min});
                continue;
            }
            const double p = rng.uniform(r.box.p_min, r.box.p_max);
            const double q = rng.uniform(r.box.q_min, r.box.q_max);
            batch.points.push_back({p, q});
        }
    }
    return batch;
}

InjectionSet nodal_injections(std::size_t bus_count, std::span<const NodeRef> nodes, std::span<const PQ> injections) {
    InjectionSet inj = InjectionSet::zeros(bus_count);
    for (std::size_t h = 0; h < nodes.size(); ++h) inj.add(nodes[h].bus, nodes[h].phase, injections[h].p, injections[h].q);
    return inj;
}

FeasibleSet feasible_set(const AdmittanceModel& adm, std::span<const NodeRef> nodes, const ScenarioBatch& batch,
                         std::span<const std::size_t> tracked, std::span<const std::string> tracked_ids,
                         const VoltageBand& band, const SolverOptions& solver) {
    if (nodes.size() != batch.households) throw InputError("scenario batch does not match the household roster");
    FeasibleSet out;
    out.households.assign(tracked.begin(), tracked.end());
    out.points.resize(tracked.size());
    out.scenario_feasible.assign(batch.scenarios, false);
    out.sampled = batch.scenarios;

    for (std::size_t w = 0; w < batch.scenarios; ++w) {
        const std::span<const PQ> row(batch.points.data() + w * batch.households, batch.households);
        const InjectionSet inj = nodal_injections(adm.bus_count(), nodes, row);
        try {
            const VoltageSolution sol = solve_power_flow(adm, inj, solver);
            if (!check_limits(sol, band.lo, band.hi).empty()) {
                ++out.violating;
                continue;
            }
        } catch (const ConvergenceError&) {
            ++out.divergent;
            continue;
        }
        out.scenario_feasible[w] = true;
        ++out.feasible;
        for (std::size_t k = 0; k < tracked.size(); ++k) out.points[k].push_back(row[tracked[k]]);
    }
    if (out.feasible == 0 && !tracked.empty()) {
        const std::string& id = tracked_ids.empty() ? std::string("?") : tracked_ids[0];
        throw EnvelopeError(fmt::format("no feasible scenario among {} for household '{}' ({} violating, {} divergent)",
                                        batch.scenarios, id, out.violating, out.divergent),
                            id);
    }
    return out;
}

EnvelopePolytope make_envelope(std::string household, std::span<const PQ> feasible_points) {
    EnvelopePolytope env;
    env.household = std::move(household);
    env.feasible = feasible_points.size();
    env.vertices = convex_hull(feasible_points);
    env.halfspace = halfspace_rep(env.vertices);
    return env;
}

std::vector<NodeRef> connection_nodes(const FeederModel& feeder, std::span<const HouseholdSpec> households) {
    std::vector<NodeRef> nodes;
    nodes.reserve(households.size());
    for (const auto& h : households) {
        const auto k = feeder.find_household(h.id);
        if (!k) throw ConfigError(fmt::format("household '{}' is not connected in the feeder", h.id));
        const auto& conn = feeder.households()[*k];
        nodes.push_back({feeder.bus_index(conn.bus), conn.phase});
    }
    return nodes;
}

EnvelopeResult build_envelopes(const FeederModel& feeder, const AdmittanceModel& adm,
                               std::span<const HouseholdSpec> households, std::span<const HouseholdInputs> inputs,
                               const EnvelopeRequest& request) {
    if (households.size() != inputs.size()) throw InputError("household inputs do not match the roster");
    const std::vector<NodeRef> nodes = connection_nodes(feeder, households);

    EnvelopeResult result;
    std::vector<SamplingRegion> regions;
    std::vector<std::string> doe_ids;
    for (std::size_t h = 0; h < households.size(); ++h) {
        const auto lim = injection_limits(households[h], inputs[h].pv_kw, inputs[h].ul_kw);
        result.limits.push_back(lim);
        const bool doe = households[h].cls == HouseholdClass::Doe;
        regions.push_back({bounding_box(lim), doe});
        if (doe) {
            result.doe_households.push_back(h);
            doe_ids.push_back(households[h].id);
        }
    }

    ScenarioBatch batch = sample_scenarios(regions, request.scenarios, request.seed);
    result.feasible = feasible_set(adm, nodes, batch, result.doe_households, doe_ids, request.band, request.solver);

    for (std::size_t k = 0; k < result.doe_households.size(); ++k) {
        const auto& pts = result.feasible.points[k];
        EnvelopePolytope env = make_envelope(doe_ids[k], pts);
        env.step = request.step;
        env.time_s = request.time_s;
        env.sampled = result.feasible.sampled;
        if (pts.size() < 3) {
            result.warnings.push_back(fmt::format("step {}: household '{}' has {} feasible scenario(s); degenerate envelope",
                                                  request.step, doe_ids[k], pts.size()));
        } else if (env.degenerate()) {
            result.warnings.push_back(
                fmt::format("step {}: household '{}' feasible pairs are collinear; degenerate envelope", request.step,
                            doe_ids[k]));
        }
        result.envelopes.push_back(std::move(env));
    }
    if (request.keep_samples) result.samples = std::move(batch);
    return result;
}

}  // namespace doedr
