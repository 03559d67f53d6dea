#include "doedr/study.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace doedr {

namespace {

// Stream tags for derive_seed; the numbering is part of the determinism contract.
enum SeedTag : std::uint64_t {
    kEnvelopeSeed = 1,
    kProfileSeed = 2,
    kReferenceSeed = 3,
    kClassSeed = 10,
    kParamSeed = 11,
};

fs::path resolve(const fs::path& base, const std::string& value) {
    fs::path p(value);
    return p.is_absolute() ? p : base / p;
}

std::array<double, 2> get_range(const ConfigSection& s, const std::string& key, std::array<double, 2> fallback) {
    const auto v = s.find(key);
    if (!v) return fallback;
    std::istringstream in(*v);
    std::string a, b, extra;
    if (!(in >> a >> b) || (in >> extra)) throw ConfigError(fmt::format("[{}] {} expects two numbers 'lo hi'", s.name(), key));
    const std::array<double, 2> r{parse_double(a, key), parse_double(b, key)};
    if (r[0] > r[1]) throw ConfigError(fmt::format("[{}] {}: lower bound exceeds upper bound", s.name(), key));
    return r;
}

}  // namespace

void StudyConfig::validate() const {
    if (control_step_s <= 0 || grid_step_s <= 0) throw ConfigError("time steps must be positive");
    if (control_step_s % grid_step_s != 0) {
        throw ConfigError(fmt::format("control step {} s is not a multiple of the grid step {} s", control_step_s, grid_step_s));
    }
    if (end_s <= start_s) throw ConfigError("DR window is empty");
    if ((end_s - start_s) % control_step_s != 0) {
        throw ConfigError(fmt::format("DR window {}-{} is not a whole number of {} s steps", format_clock(start_s),
                                      format_clock(end_s), control_step_s));
    }
    if (!(band.lo < band.hi) || !(band.lo > 0.0)) throw ConfigError("voltage band must satisfy 0 < v_min < v_max");
    if (scenarios < 1) throw ConfigError("scenario count must be at least 1");
    if (!(solver.tolerance_pu > 0.0) || solver.max_iterations < 1) throw ConfigError("invalid load-flow settings");
    try {
        admm.validate();
    } catch (const InputError& e) {
        throw ConfigError(e.what());
    }
    if (!(comfort.lo < comfort.hi)) throw ConfigError("comfort band is empty");
    if (!(reference.regulation_fraction >= 0.0 && reference.regulation_fraction <= 1.0)) {
        throw ConfigError("regulation fraction must lie in [0, 1]");
    }
    if (roster.pv_ratings_kw.empty()) throw ConfigError("roster needs at least one PV rating");
    if (!(roster.cop > 0.0) || roster.resistance[0] <= 0.0 || roster.capacitance[0] <= 0.0) {
        throw ConfigError("thermal parameter ranges must be positive");
    }
}

ordered_json StudyConfig::to_json() const {
    ordered_json j;
    j["feeder"] = feeder_path.string();
    j["seed"] = seed;
    j["window"] = {{"start", format_clock(start_s)},
                   {"end", format_clock(end_s)},
                   {"control_step_s", control_step_s},
                   {"grid_step_s", grid_step_s}};
    j["network"] = {{"v_min", band.lo},
                    {"v_max", band.hi},
                    {"pf_tolerance", solver.tolerance_pu},
                    {"pf_max_iterations", solver.max_iterations}};
    j["envelope"] = {{"scenarios", scenarios}};
    j["admm"] = {{"rho", admm.rho}, {"eps_prim", admm.eps_prim}, {"eps_dual", admm.eps_dual}, {"maxiter", admm.max_iterations}};
    if (households.empty()) {
        j["roster"] = {{"doe", roster.doe},
                       {"non_doe", roster.non_doe},
                       {"passive", roster.passive},
                       {"pv_ratings_kw", roster.pv_ratings_kw},
                       {"ac_rating_kw", roster.ac_rating_kw},
                       {"resistance", roster.resistance},
                       {"capacitance", roster.capacitance},
                       {"cop", roster.cop}};
    } else {
        auto& rows = j["households"] = ordered_json::array();
        for (const auto& h : households) {
            rows.push_back({{"id", h.id},
                            {"class", to_string(h.cls)},
                            {"pv_rating_kw", h.pv_rating_kw},
                            {"ac_rating_kw", h.ac_rating_kw},
                            {"resistance", h.resistance},
                            {"capacitance", h.capacitance}});
        }
        j["cop"] = roster.cop;
    }
    j["limits"] = {{"import_kw", import_limit_kw}, {"export_kw", export_limit_kw}};
    j["thermal"] = {{"comfort_lo", comfort.lo}, {"comfort_hi", comfort.hi}, {"initial", initial_indoor_c}};
    if (profile_path) {
        j["profiles"] = {{"source", "file"}, {"file", profile_path->string()}};
    } else {
        j["profiles"] = {{"source", "synthetic"},
                         {"pv_derate", synthetic.pv_derate},
                         {"t_out_mean", synthetic.t_out_mean_c},
                         {"t_out_amplitude", synthetic.t_out_amplitude_c},
                         {"price_base", synthetic.price_base},
                         {"price_spread", synthetic.price_spread}};
    }
    j["reference"] = {{"shape", to_string(reference.shape)},
                      {"fraction", reference.regulation_fraction},
                      {"period_s", reference.period_s},
                      {"ramp_start", format_clock(reference.ramp_start_s)},
                      {"ramp_end", format_clock(reference.ramp_end_s)},
                      {"setpoint", baseline_setpoint_c}};
    if (envelope_dir) j["envelopes"] = envelope_dir->string();
    return j;
}

StudyConfig parse_study(const TextConfig& config, const fs::path& base_dir) {
    StudyConfig c;
    const auto& study = config.require("study");
    c.feeder_path = resolve(base_dir, study.get_string("feeder"));
    c.seed = static_cast<std::uint64_t>(study.get_int("seed", 7));

    if (const auto* w = config.find("window")) {
        if (auto v = w->find("start")) c.start_s = parse_clock(*v, "[window] start");
        if (auto v = w->find("end")) c.end_s = parse_clock(*v, "[window] end");
        c.control_step_s = w->get_int("control_step_s", c.control_step_s);
        c.grid_step_s = w->get_int("grid_step_s", c.grid_step_s);
    }
    if (const auto* n = config.find("network")) {
        c.band.lo = n->get_double("v_min", c.band.lo);
        c.band.hi = n->get_double("v_max", c.band.hi);
        c.solver.tolerance_pu = n->get_double("pf_tolerance", c.solver.tolerance_pu);
        c.solver.max_iterations = static_cast<int>(n->get_int("pf_max_iterations", c.solver.max_iterations));
    }
    if (const auto* e = config.find("envelope")) {
        const long n = e->get_int("scenarios", static_cast<long>(c.scenarios));
        if (n < 1) throw ConfigError("[envelope] scenarios must be at least 1");
        c.scenarios = static_cast<std::size_t>(n);
    }
    if (const auto* a = config.find("admm")) {
        c.admm.rho = a->get_double("rho", c.admm.rho);
        c.admm.eps_prim = a->get_double("eps_prim", c.admm.eps_prim);
        c.admm.eps_dual = a->get_double("eps_dual", c.admm.eps_dual);
        c.admm.max_iterations = static_cast<int>(a->get_int("maxiter", c.admm.max_iterations));
    }
    if (const auto* r = config.find("roster")) {
        auto count = [&](const char* key, std::size_t fallback) {
            const long v = r->get_int(key, static_cast<long>(fallback));
            if (v < 0) throw ConfigError(fmt::format("[roster] {} must be non-negative", key));
            return static_cast<std::size_t>(v);
        };
        c.roster.doe = count("doe", c.roster.doe);
        c.roster.non_doe = count("non_doe", c.roster.non_doe);
        c.roster.passive = count("passive", c.roster.passive);
        if (auto v = r->find("pv_ratings_kw")) {
            c.roster.pv_ratings_kw.clear();
            std::istringstream in(*v);
            std::string tok;
            while (in >> tok) c.roster.pv_ratings_kw.push_back(parse_double(tok, "[roster] pv_ratings_kw"));
        }
        c.roster.ac_rating_kw = get_range(*r, "ac_rating_kw", c.roster.ac_rating_kw);
        c.roster.resistance = get_range(*r, "resistance", c.roster.resistance);
        c.roster.capacitance = get_range(*r, "capacitance", c.roster.capacitance);
        c.roster.cop = r->get_double("cop", c.roster.cop);
        c.import_limit_kw = r->get_double("import_limit_kw", c.import_limit_kw);
        c.export_limit_kw = r->get_double("export_limit_kw", c.export_limit_kw);
    }
    if (const auto* h = config.find("households")) {
        // id class pv_rating_kw ac_rating_kw [R C]
        for (const auto& row : h->rows()) {
            const auto where = h->where(row.line);
            if (row.tokens.size() != 4 && row.tokens.size() != 6) {
                throw ConfigError(fmt::format("{} expected 'id class pv_kw ac_kw [R C]'", where));
            }
            RosterEntry e;
            e.id = row.tokens[0];
            try {
                e.cls = household_class_from_string(row.tokens[1]);
            } catch (const Error& ex) {
                throw ConfigError(fmt::format("{} {}", where, ex.what()));
            }
            e.pv_rating_kw = parse_double(row.tokens[2], where);
            e.ac_rating_kw = parse_double(row.tokens[3], where);
            if (row.tokens.size() == 6) {
                e.resistance = parse_double(row.tokens[4], where);
                e.capacitance = parse_double(row.tokens[5], where);
            }
            c.households.push_back(std::move(e));
        }
    }
    if (const auto* t = config.find("thermal")) {
        c.comfort.lo = t->get_double("comfort_lo", c.comfort.lo);
        c.comfort.hi = t->get_double("comfort_hi", c.comfort.hi);
        c.initial_indoor_c = t->get_double("initial", c.initial_indoor_c);
    }
    if (const auto* p = config.find("profiles")) {
        const auto source = p->get_string("source", "synthetic");
        if (source == "file") {
            c.profile_path = resolve(base_dir, p->get_string("file"));
        } else if (source != "synthetic") {
            throw ConfigError(fmt::format("[profiles] source must be 'synthetic' or 'file', got '{}'", source));
        }
        auto& s = c.synthetic;
        s.pv_derate = p->get_double("pv_derate", s.pv_derate);
        s.t_out_mean_c = p->get_double("t_out_mean", s.t_out_mean_c);
        s.t_out_amplitude_c = p->get_double("t_out_amplitude", s.t_out_amplitude_c);
        s.t_out_peak_h = p->get_double("t_out_peak_h", s.t_out_peak_h);
        s.price_base = p->get_double("price_base", s.price_base);
        s.price_spread = p->get_double("price_spread", s.price_spread);
    }
    if (const auto* r = config.find("reference")) {
        if (auto v = r->find("shape")) c.reference.shape = reference_shape_from_string(*v);
        c.reference.regulation_fraction = r->get_double("fraction", c.reference.regulation_fraction);
        c.reference.period_s = r->get_int("period_s", c.reference.period_s);
        if (auto v = r->find("ramp_start")) c.reference.ramp_start_s = parse_clock(*v, "[reference] ramp_start");
        if (auto v = r->find("ramp_end")) c.reference.ramp_end_s = parse_clock(*v, "[reference] ramp_end");
        c.baseline_setpoint_c = r->get_double("setpoint", c.baseline_setpoint_c);
    }
    c.validate();
    return c;
}

StudyConfig load_study(const fs::path& path) {
    const TextConfig cfg = TextConfig::load(path);
    return parse_study(cfg, path.parent_path());
}

std::vector<HouseholdSpec> build_roster(const StudyConfig& cfg, const FeederModel& feeder) {
    const auto& conns = feeder.households();
    std::vector<HouseholdSpec> out(conns.size());
    ThermalParams thermal;
    thermal.cop = cfg.roster.cop;
    thermal.dt_h = static_cast<double>(cfg.control_step_s) / 3600.0;

    auto finish = [&](HouseholdSpec& h) {
        h.comfort = cfg.comfort;
        h.import_limit_kw = cfg.import_limit_kw;
        h.export_limit_kw = cfg.export_limit_kw;
        h.validate();
    };

    if (!cfg.households.empty()) {
        if (cfg.households.size() != conns.size()) {
            throw ConfigError(fmt::format("study lists {} households but the feeder connects {}", cfg.households.size(),
                                          conns.size()));
        }
        for (const auto& e : cfg.households) {
            const auto k = feeder.find_household(e.id);
            if (!k) throw ConfigError(fmt::format("household '{}' is not connected in the feeder", e.id));
            HouseholdSpec& h = out[*k];
            if (!h.id.empty()) throw ConfigError(fmt::format("household '{}' is listed twice", e.id));
            h.id = e.id;
            h.cls = e.cls;
            h.pv_rating_kw = e.cls == HouseholdClass::Passive ? 0.0 : e.pv_rating_kw;
            h.ac_rating_kw = e.ac_rating_kw;
            h.thermal = thermal;
            h.thermal.resistance = e.resistance;
            h.thermal.capacitance = e.capacitance;
            try {
                finish(h);
            } catch (const InputError& ex) {
                throw ConfigError(ex.what());
            }
        }
        return out;
    }

    const auto& r = cfg.roster;
    if (r.doe + r.non_doe + r.passive != conns.size()) {
        throw ConfigError(fmt::format("roster counts {}+{}+{} do not match the {} feeder households", r.doe, r.non_doe,
                                      r.passive, conns.size()));
    }
    std::vector<std::size_t> order(conns.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(cfg.seed, {kClassSeed}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
    std::vector<HouseholdClass> cls(conns.size(), HouseholdClass::Passive);
    for (std::size_t i = 0; i < r.doe + r.non_doe; ++i) cls[order[i]] = i < r.doe ? HouseholdClass::Doe : HouseholdClass::NonDoe;

    Rng draw(derive_seed(cfg.seed, {kParamSeed}));
    for (std::size_t k = 0; k < conns.size(); ++k) {
        HouseholdSpec& h = out[k];
        h.id = conns[k].household;
        h.cls = cls[k];
        // Every household consumes the same draws so parameters do not shift with the class split.
        const double pv = r.pv_ratings_kw[draw.below(r.pv_ratings_kw.size())];
        h.ac_rating_kw = draw.uniform(r.ac_rating_kw[0], r.ac_rating_kw[1]);
        h.thermal = thermal;
        h.thermal.resistance = draw.uniform(r.resistance[0], r.resistance[1]);
        h.thermal.capacitance = draw.uniform(r.capacitance[0], r.capacitance[1]);
        h.pv_rating_kw = h.cls == HouseholdClass::Passive ? 0.0 : pv;
        finish(h);
    }
    return out;
}

std::string_view to_string(RunMode mode) {
    switch (mode) {
        case RunMode::Full: return "run";
        case RunMode::EnvelopesOnly: return "envelopes";
        case RunMode::Track: return "track";
    }
    return "unknown";
}

StudyInputs prepare_study(const StudyConfig& cfg) {
    cfg.validate();
    FeederModel feeder = load_feeder(cfg.feeder_path);
    AdmittanceModel adm = assemble_admittance(feeder);
    std::vector<HouseholdSpec> roster = build_roster(cfg, feeder);

    ProfileSet profiles;
    if (cfg.profile_path) {
        profiles = read_profiles(*cfg.profile_path, roster);
    } else {
        SyntheticSpec spec = cfg.synthetic;
        spec.start_s = cfg.start_s;
        spec.end_s = cfg.end_s + cfg.control_step_s;
        spec.step_s = cfg.grid_step_s;
        profiles = synthesize_profiles(roster, spec, derive_seed(cfg.seed, {kProfileSeed}));
    }
    if (profiles.step_s() != cfg.grid_step_s) {
        throw ConfigError(fmt::format("profiles are sampled every {} s but the grid step is {} s", profiles.step_s(),
                                      cfg.grid_step_s));
    }
    profiles.validate_coverage(cfg.start_s, cfg.end_s + cfg.control_step_s);

    const std::size_t steps = cfg.control_steps();
    TimeSeriesProfile t_out_ctrl{SignalKind::Tout, cfg.start_s, cfg.control_step_s, std::vector<double>(steps)};
    for (std::size_t k = 0; k < steps; ++k) {
        const long t0 = cfg.start_s + cfg.control_step_s * static_cast<long>(k);
        t_out_ctrl.values[k] = profiles.t_out.mean_over(t0, t0 + cfg.control_step_s);
    }
    std::vector<HouseholdSpec> doe;
    for (const auto& h : roster) {
        if (h.cls == HouseholdClass::Doe) doe.push_back(h);
    }
    const std::vector<ThermalState> initial(doe.size(), ThermalState{cfg.initial_indoor_c});
    TimeSeriesProfile baseline = thermostat_baseline(doe, initial, t_out_ctrl, cfg.baseline_setpoint_c);

    TimeSeriesProfile p_ref;
    if (profiles.p_ref) {
        p_ref = {SignalKind::Pref, cfg.start_s, cfg.control_step_s, std::vector<double>(steps)};
        for (std::size_t k = 0; k < steps; ++k) {
            const long t0 = cfg.start_s + cfg.control_step_s * static_cast<long>(k);
            p_ref.values[k] = profiles.p_ref->mean_over(t0, t0 + cfg.control_step_s);
        }
    } else {
        p_ref = build_reference(baseline, cfg.reference, derive_seed(cfg.seed, {kReferenceSeed}));
    }
    return {std::move(feeder), std::move(adm), std::move(roster), std::move(profiles), std::move(p_ref), std::move(baseline)};
}

namespace {

struct StepView {
    long t0 = 0;
    long t1 = 0;
    double price = 0.0;
    double t_out = 0.0;
    std::vector<HouseholdInputs> mean;  ///< per roster household
};

StepView step_view(const StudyInputs& in, long t0, long t1) {
    StepView v;
    v.t0 = t0;
    v.t1 = t1;
    v.price = in.profiles.price.mean_over(t0, t1);
    v.t_out = in.profiles.t_out.mean_over(t0, t1);
    for (std::size_t h = 0; h < in.roster.size(); ++h) {
        v.mean.push_back({in.profiles.pv[h].mean_over(t0, t1), in.profiles.ul[h].mean_over(t0, t1)});
    }
    return v;
}

void finalize_summary(RunArtifacts& a, const std::vector<HouseholdSpec>& roster, double init_temp) {
    RunSummary& s = a.summary;
    s.control_steps = a.mode == "envelopes" ? a.envelopes.size() : a.steps.size();
    s.grid_records = a.grid.size();
    s.v_min_pu = std::numeric_limits<double>::infinity();
    s.v_max_pu = -std::numeric_limits<double>::infinity();
    for (const auto& g : a.grid) {
        for (const double v : g.magnitude_pu) {
            s.v_min_pu = std::min(s.v_min_pu, v);
            s.v_max_pu = std::max(s.v_max_pu, v);
        }
    }
    if (a.grid.empty()) s.v_min_pu = s.v_max_pu = 0.0;
    const bool any_doe =
        std::any_of(roster.begin(), roster.end(), [](const HouseholdSpec& h) { return h.cls == HouseholdClass::Doe; });
    s.t_in_min_c = s.t_in_max_c = any_doe ? init_temp : 0.0;
    for (const auto& d : a.dispatch) {
        s.t_in_min_c = std::min({s.t_in_min_c, d.t_in_start_c, d.t_in_end_c});
        s.t_in_max_c = std::max({s.t_in_max_c, d.t_in_start_c, d.t_in_end_c});
    }
    for (const auto& st : a.steps) {
        s.max_tracking_error_kw = std::max(s.max_tracking_error_kw, st.tracking_error_kw);
        if (st.reference_feasible) {
            s.max_tracking_error_feasible_kw = std::max(s.max_tracking_error_feasible_kw, st.tracking_error_kw);
        } else {
            ++s.infeasible_reference_steps;
        }
        if (st.stop == StopReason::MaxIterations) ++s.maxiter_steps;
    }
    for (const auto& step : a.envelopes) {
        for (const auto& e : step) s.degenerate_envelopes += e.degenerate() ? 1 : 0;
    }
    if (!a.step_wall_s.empty()) {
        s.mean_step_wall_s = std::accumulate(a.step_wall_s.begin(), a.step_wall_s.end(), 0.0) /
                             static_cast<double>(a.step_wall_s.size());
        s.max_step_wall_s = *std::max_element(a.step_wall_s.begin(), a.step_wall_s.end());
    }
}

std::vector<EnvelopePolytope> load_step_envelopes(const StudyConfig& cfg, int step, const std::vector<std::string>& doe_ids) {
    const fs::path path = *cfg.envelope_dir / envelope_file_name(step);
    auto envs = read_envelopes(path);
    if (envs.size() != doe_ids.size()) {
        throw ConfigError(fmt::format("{}: {} envelopes for {} DOE customers", path.string(), envs.size(), doe_ids.size()));
    }
    for (std::size_t k = 0; k < envs.size(); ++k) {
        if (envs[k].household != doe_ids[k]) {
            throw ConfigError(fmt::format("{}: record {} is for '{}', expected '{}'", path.string(), k + 1,
                                          envs[k].household, doe_ids[k]));
        }
    }
    return envs;
}

}  // namespace

RunArtifacts run_study(const StudyConfig& cfg, const RunOptions& options) {
    using clock = std::chrono::steady_clock;
    RunArtifacts art;
    art.config = cfg.to_json();
    art.seed = cfg.seed;
    art.mode = std::string(to_string(options.mode));
    art.started_utc = utc_timestamp();
    if (options.mode == RunMode::Track && !cfg.envelope_dir) {
        throw ConfigError("track mode needs an envelope directory");
    }

    std::vector<HouseholdSpec> roster;
    try {
        const StudyInputs in = prepare_study(cfg);
        roster = in.roster;
        art.profiles = in.profiles;
        const auto& feeder = in.feeder;
        for (const auto& b : feeder.buses()) {
            for (std::size_t p = 0; p < kPhases; ++p) art.bus_labels.push_back(fmt::format("{}.{}", b, phase_letter(p)));
        }
        const std::vector<NodeRef> nodes = connection_nodes(feeder, in.roster);
        std::vector<std::size_t> doe;
        std::vector<std::string> doe_ids;
        for (std::size_t h = 0; h < in.roster.size(); ++h) {
            if (in.roster[h].cls == HouseholdClass::Doe) {
                doe.push_back(h);
                doe_ids.push_back(in.roster[h].id);
            }
        }
        if (options.mode != RunMode::EnvelopesOnly && doe.empty()) throw ConfigError("study has no DOE customers to dispatch");

        std::vector<ThermalState> state(doe.size(), ThermalState{cfg.initial_indoor_c});
        std::vector<double> warm(doe.size(), 0.0);
        const double dt_h = static_cast<double>(cfg.control_step_s) / 3600.0;
        const double grid_dt_h = static_cast<double>(cfg.grid_step_s) / 3600.0;
        std::size_t record = 0;

        for (std::size_t k = 0; k < cfg.control_steps(); ++k) {
            const auto wall0 = clock::now();
            const int step = static_cast<int>(k);
            const long t0 = cfg.start_s + cfg.control_step_s * static_cast<long>(k);
            const StepView view = step_view(in, t0, t0 + cfg.control_step_s);

            // Stage I on the step-mean forecast; other classes enter at their curtailed point.
            std::vector<EnvelopePolytope> envs;
            StepRecord rec;
            rec.step = step;
            rec.time_s = t0;
            if (options.mode == RunMode::Track) {
                envs = load_step_envelopes(cfg, step, doe_ids);
            } else {
                std::vector<HouseholdInputs> stage_inputs = view.mean;
                for (std::size_t h = 0; h < in.roster.size(); ++h) {
                    if (in.roster[h].cls == HouseholdClass::Doe) continue;
                    stage_inputs[h].pv_kw = apply_static_limits(in.roster[h], view.mean[h].pv_kw, view.mean[h].ul_kw).pv_used_kw;
                }
                EnvelopeRequest req;
                req.step = step;
                req.time_s = t0;
                req.scenarios = cfg.scenarios;
                req.seed = derive_seed(cfg.seed, {kEnvelopeSeed, k});
                req.band = cfg.band;
                req.solver = cfg.solver;
                EnvelopeResult env = build_envelopes(feeder, in.admittance, in.roster, stage_inputs, req);
                for (auto& w : env.warnings) art.warnings.push_back(std::move(w));
                if (options.check_containment) {
                    for (std::size_t e = 0; e < env.envelopes.size(); ++e) {
                        for (const auto& pt : env.feasible.points[e]) {
                            art.summary.max_envelope_violation =
                                std::max(art.summary.max_envelope_violation, env.envelopes[e].halfspace.max_violation(pt));
                        }
                    }
                }
                rec.scenarios_feasible = env.feasible.feasible;
                rec.scenarios_divergent = env.feasible.divergent;
                rec.scenarios_violating = env.feasible.violating;
                envs = std::move(env.envelopes);
            }
            art.envelopes.push_back(envs);
            if (options.mode == RunMode::EnvelopesOnly) {
                art.step_wall_s.push_back(std::chrono::duration<double>(clock::now() - wall0).count());
                if (options.on_step) options.on_step(rec, art.step_wall_s.back());
                continue;
            }

            // Stage II.
            std::vector<LocalProblemData> local;
            for (std::size_t j = 0; j < doe.size(); ++j) {
                const std::size_t h = doe[j];
                local.push_back(make_local_problem(in.roster[h], state[j], view.t_out, view.price * dt_h,
                                                   view.mean[h].pv_kw, view.mean[h].ul_kw, envs[j].halfspace));
            }
            const double p_ref = in.p_ref.values[k];
            const TrackResult track = admm_track(local, warm, p_ref, cfg.admm);
            const auto& dispatch = track.admm.dispatch();

            rec.p_ref_kw = p_ref;
            rec.p_total_kw = track.admm.total();
            rec.tracking_error_kw = track.admm.tracking_error();
            rec.iterations = track.admm.state.iteration;
            rec.primal_norm = track.admm.primal_norm_history.back();
            rec.dual_norm = track.admm.dual_norm_history.back();
            rec.stop = track.admm.stop;
            for (const auto& iv : track.intervals) {
                rec.feasible_lo_kw += iv.interval.lo;
                rec.feasible_hi_kw += iv.interval.hi;
                if (iv.fallback) {
                    ++rec.fallbacks;
                    if (iv.conflict == InfeasibilitySource::Envelope) {
                        ++art.summary.envelope_conflicts;
                    } else {
                        ++art.summary.comfort_fallbacks;
                    }
                }
            }
            rec.reference_feasible = p_ref >= rec.feasible_lo_kw - 1e-9 && p_ref <= rec.feasible_hi_kw + 1e-9;

            // Grid evaluation with dispatch held over the sub-steps.
            for (std::size_t j = 0; j < cfg.substeps(); ++j) {
                const long t = t0 + cfg.grid_step_s * static_cast<long>(j);
                std::vector<PQ> injections(in.roster.size());
                std::size_t next_doe = 0;
                for (std::size_t h = 0; h < in.roster.size(); ++h) {
                    const auto& spec = in.roster[h];
                    const double pv = in.profiles.pv[h].at(t);
                    const double ul = in.profiles.ul[h].at(t);
                    if (spec.cls == HouseholdClass::Doe) {
                        injections[h] = doe_injection(spec, pv, ul, dispatch[next_doe++]);
                        continue;
                    }
                    const StaticLimitResult sl = apply_static_limits(spec, pv, ul);
                    injections[h] = sl.injection;
                    if (sl.curtailed_kw > 0.0 || sl.import_violation) {
                        art.curtailment.push_back({record, t, spec.id, pv, sl.pv_used_kw, sl.curtailed_kw, sl.injection.p,
                                                   sl.import_violation});
                        if (sl.curtailed_kw > 0.0) {
                            ++art.summary.curtailment_events;
                            art.summary.curtailed_kwh += sl.curtailed_kw * grid_dt_h;
                        }
                        if (sl.import_violation) ++art.summary.import_violations;
                    }
                }
                GridRecord g;
                g.record = record++;
                g.step = step;
                g.time_s = t;
                try {
                    const VoltageSolution sol =
                        solve_power_flow(in.admittance, nodal_injections(in.admittance.bus_count(), nodes, injections), cfg.solver);
                    g.violations = check_limits(sol, cfg.band.lo, cfg.band.hi).size();
                    for (std::size_t b = 0; b < sol.voltage_pu.size(); ++b) {
                        for (std::size_t p = 0; p < kPhases; ++p) g.magnitude_pu.push_back(sol.magnitude(b, p));
                    }
                } catch (const ConvergenceError&) {
                    g.converged = false;
                }
                if (!g.converged || g.violations > 0) ++art.summary.failed_guarantee_events;
                art.grid.push_back(std::move(g));
            }

            // Thermal update and records.
            for (std::size_t j = 0; j < doe.size(); ++j) {
                const std::size_t h = doe[j];
                DispatchRecord d;
                d.step = step;
                d.time_s = t0;
                d.household = in.roster[h].id;
                d.p_ac_kw = dispatch[j];
                d.interval_lo_kw = track.intervals[j].interval.lo;
                d.interval_hi_kw = track.intervals[j].interval.hi;
                const PQ inj = local[j].injection(dispatch[j]);
                d.p_inj_kw = inj.p;
                d.q_inj_kvar = inj.q;
                d.t_in_start_c = state[j].indoor_c;
                state[j] = step_temperature(state[j], in.roster[h].thermal, view.t_out, dispatch[j]);
                d.t_in_end_c = state[j].indoor_c;
                d.conflict = track.intervals[j].fallback ? std::string(to_string(track.intervals[j].conflict)) : "none";
                d.dropped_rows = track.intervals[j].dropped_rows;
                art.dispatch.push_back(std::move(d));
            }
            warm = dispatch;
            art.steps.push_back(rec);
            art.step_wall_s.push_back(std::chrono::duration<double>(clock::now() - wall0).count());
            if (options.on_step) options.on_step(rec, art.step_wall_s.back());
        }
    } catch (const std::exception& e) {
        art.complete = false;
        art.error = e.what();
        art.finished_utc = utc_timestamp();
        finalize_summary(art, roster, cfg.initial_indoor_c);
        if (options.out_dir) {
            try {
                persist_results(art, *options.out_dir);
            } catch (const Error&) {
                // keep the original failure
            }
        }
        throw;
    }

    art.complete = true;
    art.finished_utc = utc_timestamp();
    finalize_summary(art, roster, cfg.initial_indoor_c);
    if (options.out_dir) persist_results(art, *options.out_dir);
    return art;
}

}  // namespace doedr
