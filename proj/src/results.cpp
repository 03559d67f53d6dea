#include "doedr/results.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/textconfig.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace doedr {

ordered_json to_json(const RunSummary& s) {
    ordered_json j;
    j["control_steps"] = s.control_steps;
    j["grid_records"] = s.grid_records;
    j["max_tracking_error_kw"] = s.max_tracking_error_kw;
    j["max_tracking_error_feasible_kw"] = s.max_tracking_error_feasible_kw;
    j["infeasible_reference_steps"] = s.infeasible_reference_steps;
    j["v_min_pu"] = s.v_min_pu;
    j["v_max_pu"] = s.v_max_pu;
    j["failed_guarantee_events"] = s.failed_guarantee_events;
    j["t_in_min_c"] = s.t_in_min_c;
    j["t_in_max_c"] = s.t_in_max_c;
    j["comfort_fallbacks"] = s.comfort_fallbacks;
    j["envelope_conflicts"] = s.envelope_conflicts;
    j["degenerate_envelopes"] = s.degenerate_envelopes;
    j["max_envelope_violation"] = s.max_envelope_violation;
    j["curtailment_events"] = s.curtailment_events;
    j["curtailed_kwh"] = s.curtailed_kwh;
    j["import_violations"] = s.import_violations;
    j["maxiter_steps"] = s.maxiter_steps;
    j["mean_step_wall_s"] = s.mean_step_wall_s;
    j["max_step_wall_s"] = s.max_step_wall_s;
    return j;
}

std::string envelope_file_name(int step) { return fmt::format("step_{:03d}.jsonl", step); }

void write_envelopes(std::ostream& out, const std::vector<EnvelopePolytope>& envelopes) {
    for (const auto& e : envelopes) {
        ordered_json j;
        j["household"] = e.household;
        j["step"] = e.step;
        j["time_s"] = e.time_s;
        j["t"] = format_clock(e.time_s);
        auto& v = j["vertices"] = ordered_json::array();
        for (const auto& p : e.vertices) v.push_back({p.p, p.q});
        auto& a = j["A"] = ordered_json::array();
        for (const auto& row : e.halfspace.a) a.push_back({row[0], row[1]});
        j["b"] = e.halfspace.b;
        j["degenerate"] = e.halfspace.degenerate;
        j["sampled"] = e.sampled;
        j["feasible"] = e.feasible;
        out << j.dump() << '\n';
    }
}

std::vector<EnvelopePolytope> read_envelopes(std::istream& in, const std::string& source) {
    std::vector<EnvelopePolytope> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = ordered_json::parse(line);
            EnvelopePolytope e;
            e.household = j.at("household").get<std::string>();
            e.step = j.at("step").get<int>();
            e.time_s = j.at("time_s").get<long>();
            for (const auto& v : j.at("vertices")) e.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            for (const auto& r : j.at("A")) e.halfspace.a.push_back({r.at(0).get<double>(), r.at(1).get<double>()});
            e.halfspace.b = j.at("b").get<std::vector<double>>();
            e.halfspace.degenerate = j.at("degenerate").get<bool>();
            e.sampled = j.at("sampled").get<std::size_t>();
            e.feasible = j.at("feasible").get<std::size_t>();
            if (e.halfspace.a.size() != e.halfspace.b.size()) {
                throw ConfigError(fmt::format("{}:{}: A and b row counts differ", source, line_no));
            }
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw ConfigError(fmt::format("{}:{}: malformed envelope record: {}", source, line_no, ex.what()));
        }
    }
    return out;
}

std::vector<EnvelopePolytope> read_envelopes(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open envelope file '{}'", path.string()));
    return read_envelopes(in, path.string());
}

namespace {

class OutFile {
  public:
    explicit OutFile(const fs::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError(fmt::format("cannot write '{}'", path.string()));
    }
    ~OutFile() = default;
    std::ofstream& stream() { return out_; }
    void close() {
        out_.close();
        if (!out_) throw IoError(fmt::format("error while writing '{}'", path_.string()));
    }

  private:
    fs::path path_;
    std::ofstream out_;
};

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
}

void write_steps(const RunArtifacts& a, const fs::path& dir) {
    OutFile f(dir / "steps.csv");
    auto& out = f.stream();
    out << "step,time_s,clock,p_ref_kw,p_total_kw,tracking_error_kw,feasible_lo_kw,feasible_hi_kw,reference_feasible,"
           "scenarios_feasible,scenarios_divergent,scenarios_violating,fallbacks\n";
    for (const auto& s : a.steps) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", s.step, s.time_s, format_clock(s.time_s), s.p_ref_kw,
                           s.p_total_kw, s.tracking_error_kw, s.feasible_lo_kw, s.feasible_hi_kw,
                           s.reference_feasible ? 1 : 0, s.scenarios_feasible, s.scenarios_divergent,
                           s.scenarios_violating, s.fallbacks);
    }
    f.close();

    OutFile c(dir / "convergence.csv");
    c.stream() << "step,time_s,iterations,primal_norm,dual_norm,stop_reason,tracking_error_kw\n";
    for (const auto& s : a.steps) {
        c.stream() << fmt::format("{},{},{},{},{},{},{}\n", s.step, s.time_s, s.iterations, s.primal_norm, s.dual_norm,
                                  to_string(s.stop), s.tracking_error_kw);
    }
    c.close();
}

void write_dispatch(const RunArtifacts& a, const fs::path& dir) {
    OutFile f(dir / "dispatch.csv");
    auto& out = f.stream();
    out << "step,time_s,household,p_ac_kw,interval_lo_kw,interval_hi_kw,p_inj_kw,q_inj_kvar,t_in_start_c,t_in_end_c,"
           "conflict,dropped_rows\n";
    for (const auto& d : a.dispatch) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", d.step, d.time_s, d.household, d.p_ac_kw,
                           d.interval_lo_kw, d.interval_hi_kw, d.p_inj_kw, d.q_inj_kvar, d.t_in_start_c, d.t_in_end_c,
                           d.conflict, d.dropped_rows);
    }
    f.close();

    OutFile c(dir / "curtailment.csv");
    c.stream() << "record,time_s,household,pv_avail_kw,pv_used_kw,curtailed_kw,p_inj_kw,import_violation\n";
    for (const auto& r : a.curtailment) {
        c.stream() << fmt::format("{},{},{},{},{},{},{},{}\n", r.record, r.time_s, r.household, r.pv_avail_kw,
                                  r.pv_used_kw, r.curtailed_kw, r.p_inj_kw, r.import_violation ? 1 : 0);
    }
    c.close();
}

void write_grid(const RunArtifacts& a, const fs::path& dir) {
    OutFile f(dir / "voltages.csv");
    auto& out = f.stream();
    out << "record,step,time_s,converged,violations";
    for (const auto& l : a.bus_labels) out << ',' << l;
    out << '\n';
    for (const auto& g : a.grid) {
        out << fmt::format("{},{},{},{},{}", g.record, g.step, g.time_s, g.converged ? 1 : 0, g.violations);
        if (g.magnitude_pu.empty()) {
            for (std::size_t i = 0; i < a.bus_labels.size(); ++i) out << ',';
        } else {
            for (const double v : g.magnitude_pu) out << fmt::format(",{}", v);
        }
        out << '\n';
    }
    f.close();
}

}  // namespace

void persist_results(const RunArtifacts& a, const fs::path& out_dir) {
    make_dir(out_dir);
    std::vector<std::string> files;

    if (a.profiles) {
        OutFile f(out_dir / "profiles.csv");
        write_profiles(f.stream(), *a.profiles);
        f.close();
        files.emplace_back("profiles.csv");
    }
    if (!a.envelopes.empty()) {
        make_dir(out_dir / "envelopes");
        for (const auto& step : a.envelopes) {
            if (step.empty()) continue;
            const auto name = envelope_file_name(step.front().step);
            OutFile f(out_dir / "envelopes" / name);
            write_envelopes(f.stream(), step);
            f.close();
            files.push_back("envelopes/" + name);
        }
    }
    if (!a.steps.empty()) {
        make_dir(out_dir / "dispatch");
        write_steps(a, out_dir / "dispatch");
        write_dispatch(a, out_dir / "dispatch");
        for (const char* n : {"dispatch/steps.csv", "dispatch/convergence.csv", "dispatch/dispatch.csv",
                              "dispatch/curtailment.csv"}) {
            files.emplace_back(n);
        }
    }
    if (!a.grid.empty()) {
        make_dir(out_dir / "gridlog");
        write_grid(a, out_dir / "gridlog");
        files.emplace_back("gridlog/voltages.csv");
    }

    ordered_json m;
    m["tool"] = "doedr";
    m["mode"] = a.mode;
    m["complete"] = a.complete;
    m["error"] = a.error.empty() ? ordered_json(nullptr) : ordered_json(a.error);
    m["seed"] = a.seed;
    m["started_utc"] = a.started_utc;
    m["finished_utc"] = a.finished_utc;
    m["config"] = a.config;
    m["summary"] = to_json(a.summary);
    m["step_wall_s"] = a.step_wall_s;
    m["warnings"] = a.warnings;
    m["files"] = files;
    OutFile f(out_dir / "manifest.json");
    f.stream() << m.dump(2) << '\n';
    f.close();
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

std::vector<StepRecord> read_steps(const fs::path& out_dir) {
    const auto steps = read_csv(out_dir / "dispatch" / "steps.csv");
    const auto conv = read_csv(out_dir / "dispatch" / "convergence.csv");
    if (steps.size() != conv.size()) throw ConfigError("steps.csv and convergence.csv disagree on row count");
    std::vector<StepRecord> out;
    const std::string ctx = (out_dir / "dispatch").string();
    for (std::size_t i = 1; i < steps.size(); ++i) {
        const auto& s = steps[i];
        const auto& c = conv[i];
        if (s.size() < 13 || c.size() < 7) throw ConfigError(fmt::format("{}: short row {}", ctx, i + 1));
        StepRecord r;
        r.step = static_cast<int>(parse_int(s[0], ctx));
        r.time_s = parse_int(s[1], ctx);
        r.p_ref_kw = parse_double(s[3], ctx);
        r.p_total_kw = parse_double(s[4], ctx);
        r.tracking_error_kw = parse_double(s[5], ctx);
        r.feasible_lo_kw = parse_double(s[6], ctx);
        r.feasible_hi_kw = parse_double(s[7], ctx);
        r.reference_feasible = s[8] == "1";
        r.scenarios_feasible = static_cast<std::size_t>(parse_int(s[9], ctx));
        r.scenarios_divergent = static_cast<std::size_t>(parse_int(s[10], ctx));
        r.scenarios_violating = static_cast<std::size_t>(parse_int(s[11], ctx));
        r.fallbacks = static_cast<std::size_t>(parse_int(s[12], ctx));
        r.iterations = static_cast<int>(parse_int(c[2], ctx));
        r.primal_norm = parse_double(c[3], ctx);
        r.dual_norm = parse_double(c[4], ctx);
        r.stop = c[5] == "converged" ? StopReason::Converged : StopReason::MaxIterations;
        out.push_back(r);
    }
    return out;
}

ordered_json read_manifest(const fs::path& out_dir) {
    std::ifstream in(out_dir / "manifest.json");
    if (!in) throw IoError(fmt::format("no manifest.json in '{}'", out_dir.string()));
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(fmt::format("{}: malformed manifest: {}", (out_dir / "manifest.json").string(), ex.what()));
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace doedr
