// doedr: command-line driver for envelope studies.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/powerflow.hpp"
#include "doedr/study.hpp"

namespace fs = std::filesystem;
using namespace doedr;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> scenarios;
    std::optional<double> rho;
    std::optional<int> maxiter;
    std::string window;
    std::string envelopes;
    bool verbose = false;
};

void add_common(CLI::App* cmd, Overrides& o, bool needs_out) {
    cmd->add_option("--config", o.config, "study configuration file")->required();
    cmd->add_option("--seed", o.seed, "RNG seed (overrides the study file)");
    auto* out = cmd->add_option("--out", o.out, "results directory");
    if (needs_out) out->required();
    cmd->add_option("--scenarios", o.scenarios, "Monte-Carlo scenarios per step")->check(CLI::PositiveNumber);
    cmd->add_option("--rho", o.rho, "ADMM penalty parameter")->check(CLI::PositiveNumber);
    cmd->add_option("--maxiter", o.maxiter, "ADMM iteration cap")->check(CLI::PositiveNumber);
    cmd->add_option("--window", o.window, "DR window HH:MM-HH:MM");
    cmd->add_flag("--verbose,-v", o.verbose, "print one line per control step");
}

StudyConfig study_from(const Overrides& o) {
    StudyConfig cfg = load_study(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.scenarios) cfg.scenarios = *o.scenarios;
    if (o.rho) cfg.admm.rho = *o.rho;
    if (o.maxiter) cfg.admm.max_iterations = *o.maxiter;
    if (!o.window.empty()) {
        const auto dash = o.window.find('-');
        if (dash == std::string::npos) throw ConfigError(fmt::format("--window expects HH:MM-HH:MM, got '{}'", o.window));
        cfg.start_s = parse_clock(o.window.substr(0, dash), "--window");
        cfg.end_s = parse_clock(o.window.substr(dash + 1), "--window");
    }
    if (!o.envelopes.empty()) cfg.envelope_dir = fs::path(o.envelopes);
    cfg.validate();
    return cfg;
}

void print_summary(const RunArtifacts& a) {
    const auto& s = a.summary;
    fmt::print("control steps          {}\n", s.control_steps);
    if (a.mode != "envelopes") {
        fmt::print("grid records           {}\n", s.grid_records);
        fmt::print("max tracking error     {:.6f} kW ({:.6f} kW over feasible steps)\n", s.max_tracking_error_kw,
                   s.max_tracking_error_feasible_kw);
        fmt::print("infeasible references  {}\n", s.infeasible_reference_steps);
        fmt::print("voltage range          [{:.5f}, {:.5f}] pu\n", s.v_min_pu, s.v_max_pu);
        fmt::print("failed guarantees      {}\n", s.failed_guarantee_events);
        fmt::print("indoor temperature     [{:.4f}, {:.4f}] degC\n", s.t_in_min_c, s.t_in_max_c);
        fmt::print("comfort fallbacks      {}   envelope conflicts {}\n", s.comfort_fallbacks, s.envelope_conflicts);
        fmt::print("curtailment events     {}   ({:.4f} kWh)\n", s.curtailment_events, s.curtailed_kwh);
        fmt::print("maxiter steps          {}\n", s.maxiter_steps);
    }
    fmt::print("degenerate envelopes   {}\n", s.degenerate_envelopes);
    fmt::print("max envelope violation {:.3e}\n", s.max_envelope_violation);
    fmt::print("mean step wall time    {:.3f} s (max {:.3f} s)\n", s.mean_step_wall_s, s.max_step_wall_s);
    for (const auto& w : a.warnings) fmt::print(stderr, "warning: {}\n", w);
}

int cmd_study(const Overrides& o, RunMode mode) {
    StudyConfig cfg = study_from(o);
    if (mode == RunMode::Track && !cfg.envelope_dir) {
        if (o.out.empty()) throw ConfigError("track needs --envelopes or an --out directory holding envelopes/");
        cfg.envelope_dir = fs::path(o.out) / "envelopes";
    }
    RunOptions opts;
    opts.mode = mode;
    if (!o.out.empty()) opts.out_dir = fs::path(o.out);
    if (o.verbose) {
        opts.on_step = [mode](const StepRecord& r, double wall) {
            if (mode == RunMode::EnvelopesOnly) {
                fmt::print(stderr, "step {:3d} {}  feasible {:4d}/{}  {:.2f} s\n", r.step, format_clock(r.time_s),
                           r.scenarios_feasible, r.scenarios_feasible + r.scenarios_divergent + r.scenarios_violating, wall);
                return;
            }
            fmt::print(stderr, "step {:3d} {}  p_ref {:8.3f}  total {:8.3f}  err {:.5f}  iters {:2d} {}  {:.2f} s\n", r.step,
                       format_clock(r.time_s), r.p_ref_kw, r.p_total_kw, r.tracking_error_kw, r.iterations,
                       to_string(r.stop), wall);
        };
    }
    const RunArtifacts art = run_study(cfg, opts);
    print_summary(art);
    if (opts.out_dir) fmt::print("results written to {}\n", opts.out_dir->string());
    return 0;
}

InjectionSet read_injections(const std::string& spec, const FeederModel& feeder) {
    InjectionSet inj = InjectionSet::zeros(feeder.buses().size());
    if (spec == "zero") return inj;
    std::ifstream in(spec);
    if (!in) throw ConfigError(fmt::format("cannot open injection file '{}'", spec));
    // bus,phase,p_kw,q_kvar
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line[0] == '#' || line.rfind("bus,", 0) == 0) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        const auto where = fmt::format("{}:{}:", spec, n);
        if (cells.size() != 4) throw ConfigError(fmt::format("{} expected bus,phase,p_kw,q_kvar", where));
        if (cells[1].size() != 1 || cells[1][0] < 'a' || cells[1][0] > 'c') {
            throw ConfigError(fmt::format("{} phase must be a, b or c", where));
        }
        std::size_t bus = 0;
        try {
            bus = feeder.bus_index(cells[0]);
        } catch (const Error&) {
            throw ConfigError(fmt::format("{} unknown bus '{}'", where, cells[0]));
        }
        inj.add(bus, static_cast<std::size_t>(cells[1][0] - 'a'), parse_double(cells[2], where), parse_double(cells[3], where));
    }
    return inj;
}

int cmd_pf(const std::string& config, const std::string& injections, const std::string& out) {
    const FeederModel feeder = load_feeder(config);
    const AdmittanceModel adm = assemble_admittance(feeder);
    const InjectionSet inj = read_injections(injections, feeder);
    const VoltageSolution sol = solve_power_flow(adm, inj);
    std::ostringstream table;
    table << "bus,phase,v_pu,angle_deg\n";
    for (std::size_t b = 0; b < feeder.buses().size(); ++b) {
        for (std::size_t p = 0; p < kPhases; ++p) {
            const Complex v = sol.voltage_pu[b][p];
            table << fmt::format("{},{},{:.8f},{:.6f}\n", feeder.buses()[b], phase_letter(p), std::abs(v),
                                 std::arg(v) * 180.0 / 3.14159265358979323846);
        }
    }
    if (out.empty()) {
        std::cout << table.str();
    } else {
        std::ofstream f(out);
        if (!(f << table.str())) throw IoError(fmt::format("cannot write '{}'", out));
    }
    fmt::print(stderr, "converged in {} iterations, max mismatch {:.3e} pu\n", sol.iterations, sol.max_mismatch_pu);
    const auto viol = check_limits(sol, VoltageBand{}.lo, VoltageBand{}.hi);
    for (const auto& v : viol) {
        fmt::print(stderr, "{} {}.{} {:.5f} pu\n", v.kind == VoltageViolation::Kind::Under ? "under-voltage" : "over-voltage",
                   feeder.buses()[v.bus], phase_letter(v.phase), v.magnitude_pu);
    }
    return 0;
}

int cmd_report(const std::string& dir_arg) {
    const fs::path dir(dir_arg);
    const auto manifest = read_manifest(dir);
    fmt::print("mode {}  seed {}  complete {}\n", manifest.value("mode", "?"), manifest.value("seed", 0ULL),
               manifest.value("complete", false));
    if (manifest.contains("error") && !manifest["error"].is_null()) {
        fmt::print("error: {}\n", manifest["error"].get<std::string>());
    }
    if (manifest.contains("summary")) {
        for (const auto& [k, v] : manifest["summary"].items()) fmt::print("  {:32s} {}\n", k, v.dump());
    }
    if (!fs::exists(dir / "dispatch" / "steps.csv")) return 0;

    const auto steps = read_steps(dir);
    // Per-step voltage and temperature extrema for the series file.
    std::map<int, std::pair<double, double>> vrange, trange;
    if (std::ifstream g(dir / "gridlog" / "voltages.csv"); g) {
        std::string line;
        std::getline(g, line);
        while (std::getline(g, line)) {
            std::stringstream ls(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (cells.size() < 6) continue;
            const int step = std::stoi(cells[1]);
            auto& r = vrange.try_emplace(step, 1e300, -1e300).first->second;
            for (std::size_t i = 5; i < cells.size(); ++i) {
                if (cells[i].empty()) continue;
                const double v = std::stod(cells[i]);
                r.first = std::min(r.first, v);
                r.second = std::max(r.second, v);
            }
        }
    }
    if (std::ifstream d(dir / "dispatch" / "dispatch.csv"); d) {
        std::string line;
        std::getline(d, line);
        while (std::getline(d, line)) {
            std::stringstream ls(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ls, cell, ',')) cells.push_back(cell);
            if (cells.size() < 10) continue;
            auto& r = trange.try_emplace(std::stoi(cells[0]), 1e300, -1e300).first->second;
            r.first = std::min(r.first, std::stod(cells[9]));
            r.second = std::max(r.second, std::stod(cells[9]));
        }
    }

    fmt::print("\n{:>4} {:>8} {:>10} {:>10} {:>9} {:>5} {:>9} {:>8} {:>8} {:>7} {:>7}\n", "step", "time", "p_ref_kw",
               "total_kw", "err_kw", "iter", "stop", "v_min", "v_max", "t_min", "t_max");
    fs::create_directories(dir / "report");
    std::ofstream series(dir / "report" / "series.csv");
    series << "step,time_s,p_ref_kw,p_total_kw,tracking_error_kw,iterations,stop_reason,v_min_pu,v_max_pu,t_in_min_c,t_in_max_c\n";
    for (const auto& s : steps) {
        const auto v = vrange.count(s.step) ? vrange[s.step] : std::pair{0.0, 0.0};
        const auto t = trange.count(s.step) ? trange[s.step] : std::pair{0.0, 0.0};
        fmt::print("{:4d} {:>8} {:10.3f} {:10.3f} {:9.5f} {:5d} {:>9} {:8.5f} {:8.5f} {:7.3f} {:7.3f}\n", s.step,
                   format_clock(s.time_s), s.p_ref_kw, s.p_total_kw, s.tracking_error_kw, s.iterations, to_string(s.stop),
                   v.first, v.second, t.first, t.second);
        series << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", s.step, s.time_s, s.p_ref_kw, s.p_total_kw,
                              s.tracking_error_kw, s.iterations, to_string(s.stop), v.first, v.second, t.first, t.second);
    }
    if (!series) throw IoError("cannot write report/series.csv");
    fmt::print("\nseries written to {}\n", (dir / "report" / "series.csv").string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic operating envelopes and ADMM demand response on a three-phase LV feeder"};
    app.require_subcommand(1);

    Overrides run_o, env_o, track_o;
    auto* run = app.add_subcommand("run", "full closed-loop study");
    add_common(run, run_o, false);
    auto* env = app.add_subcommand("envelopes", "Stage I only: write per-step envelopes");
    add_common(env, env_o, true);
    auto* track = app.add_subcommand("track", "Stage II and grid evaluation against precomputed envelopes");
    add_common(track, track_o, false);
    track->add_option("--envelopes", track_o.envelopes, "directory of step_NNN.jsonl files (default <out>/envelopes)");

    std::string pf_config, pf_inj = "zero", pf_out;
    auto* pf = app.add_subcommand("pf", "one-shot load flow");
    pf->add_option("--config", pf_config, "feeder file")->required();
    pf->add_option("--injections", pf_inj, "'zero' or a bus,phase,p_kw,q_kvar file");
    pf->add_option("--out", pf_out, "write the voltage table here instead of stdout");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "summarize a results directory");
    report->add_option("--out,dir", report_dir, "results directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_study(run_o, RunMode::Full);
        if (*env) return cmd_study(env_o, RunMode::EnvelopesOnly);
        if (*track) return cmd_study(track_o, RunMode::Track);
        if (*pf) return cmd_pf(pf_config, pf_inj, pf_out);
        if (*report) return cmd_report(report_dir);
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        fmt::print(stderr, "internal error: {}\n", e.what());
        return 1;
    }
    return 0;
}
