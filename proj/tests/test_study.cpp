#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "doedr/error.hpp"
#include "doedr/study.hpp"

using namespace doedr;
namespace fs = std::filesystem;

namespace {

const fs::path kData = DOEDR_DATA_DIR;
const fs::path kScratch = DOEDR_SCRATCH_DIR;

fs::path fresh_dir(const std::string& name) {
    const fs::path p = kScratch / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

RunOptions options(RunMode mode, const fs::path& out) {
    RunOptions o;
    o.mode = mode;
    o.out_dir = out;
    return o;
}

StudyConfig toy() {
    auto cfg = load_study(kData / "study_toy.cfg");
    cfg.scenarios = 60;
    return cfg;
}

// src -> load with only phase a populated
fs::path single_household_feeder() {
    fs::create_directories(kScratch);
    const fs::path p = kScratch / "feeder_single.cfg";
    std::ofstream out(p);
    out << "[slack]\nbus = src\n\n[buses]\nsrc load\n\n[lines]\n"
           "src load 0.02 0.02 0.004 0.012 0.02 0.02 0.004 0.012 0.004 0.012 0.02 0.02\n\n"
           "[households]\nsolo load a\n";
    return p;
}

}  // namespace

TEST_CASE("study files parse and validate cadence") {
    const auto cfg = load_study(kData / "study_34bus.cfg");
    CHECK(cfg.seed == 7);
    CHECK(cfg.control_steps() == 24);
    CHECK(cfg.substeps() == 10);
    CHECK(cfg.scenarios == 500);
    CHECK(cfg.admm.max_iterations == 15);
    CHECK(cfg.roster.doe == 30);
    CHECK(cfg.feeder_path == kData / "feeder_34bus.cfg");

    const char* base = "[study]\nfeeder = feeder_2bus.cfg\n[window]\nstart = 10:00\nend = 10:30\n";
    CHECK_THROWS_AS(parse_study(TextConfig::parse_string(std::string(base) + "grid_step_s = 45\n"), kData), ConfigError);
    CHECK_THROWS_AS(parse_study(TextConfig::parse_string(std::string(base) + "control_step_s = 420\n"), kData), ConfigError);
    CHECK_THROWS_AS(parse_study(TextConfig::parse_string(std::string(base) + "[admm]\nrho = 0\n"), kData), ConfigError);
    CHECK_THROWS_AS(parse_study(TextConfig::parse_string(std::string(base) + "[reference]\nfraction = 2\n"), kData),
                    ConfigError);
    const auto ok = parse_study(TextConfig::parse_string(base), kData);
    CHECK(ok.control_steps() == 6);
}

TEST_CASE("roster draws match the class counts") {
    const auto cfg = load_study(kData / "study_34bus.cfg");
    const auto feeder = load_feeder(cfg.feeder_path);
    const auto a = build_roster(cfg, feeder);
    const auto b = build_roster(cfg, feeder);
    std::size_t doe = 0, non = 0, passive = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].id == feeder.households()[k].household);
        CHECK(a[k].cls == b[k].cls);
        CHECK(a[k].thermal.resistance == b[k].thermal.resistance);
        CHECK((a[k].thermal.resistance >= 1.5 && a[k].thermal.resistance <= 2.5));
        CHECK((a[k].ac_rating_kw >= 2.5 && a[k].ac_rating_kw <= 3.5));
        if (a[k].cls == HouseholdClass::Doe) ++doe;
        if (a[k].cls == HouseholdClass::NonDoe) ++non;
        if (a[k].cls == HouseholdClass::Passive) {
            ++passive;
            CHECK(a[k].pv_rating_kw == 0.0);
        }
    }
    CHECK(doe == 30);
    CHECK(non == 16);
    CHECK(passive == 56);
    auto bad = cfg;
    bad.roster.doe = 31;
    CHECK_THROWS_AS(build_roster(bad, feeder), ConfigError);
}

TEST_CASE("two-hour toy run has the expected cadence") {
    auto cfg = toy();
    cfg.end_s = 12 * 3600;
    const fs::path out = fresh_dir("toy_2h");
    const auto art = run_study(cfg, options(RunMode::Full, out));
    CHECK(art.complete);
    CHECK(art.steps.size() == 24);
    CHECK(art.grid.size() == 240);
    CHECK(art.dispatch.size() == 24);
    CHECK(art.envelopes.size() == 24);
    CHECK(art.summary.control_steps == 24);
    CHECK(art.summary.grid_records == 240);
    CHECK(art.summary.max_envelope_violation <= 1e-9);

    const auto steps = read_steps(out);
    REQUIRE(steps.size() == 24);
    CHECK(steps[5].p_ref_kw == art.steps[5].p_ref_kw);
    CHECK(steps[5].stop == art.steps[5].stop);
    const auto manifest = read_manifest(out);
    CHECK(manifest["complete"] == true);
    CHECK(manifest["seed"] == 3);
    CHECK(fs::exists(out / "envelopes" / "step_023.jsonl"));
    CHECK(fs::exists(out / "gridlog" / "voltages.csv"));

    const auto envs = read_envelopes(out / "envelopes" / "step_004.jsonl");
    REQUIRE(envs.size() == 1);
    CHECK(envs[0].vertices == art.envelopes[4][0].vertices);
    CHECK(envs[0].halfspace.b == art.envelopes[4][0].halfspace.b);
}

TEST_CASE("single household run follows a hand trace of the first step") {
    const fs::path feeder = single_household_feeder();
    const auto text = "[study]\nfeeder = " + feeder.string() +
                      "\nseed = 5\n[window]\nstart = 11:00\nend = 11:10\n[envelope]\nscenarios = 40\n"
                      "[households]\nsolo doe 5.0 3.0 2.0 2.0\n[reference]\nshape = square\nfraction = 0.2\n";
    const auto cfg = parse_study(TextConfig::parse_string(text), kData);
    const auto in = prepare_study(cfg);
    const auto art = run_study(cfg);
    REQUIRE(art.steps.size() == 2);
    REQUIRE(art.dispatch.size() == 2);

    // Step 0 inputs as the controller sees them: means over the first five minutes.
    const long t0 = 11 * 3600, t1 = t0 + 300;
    const double price = in.profiles.price.mean_over(t0, t1) * (300.0 / 3600.0);
    const double t_out = in.profiles.t_out.mean_over(t0, t1);
    const auto& d0 = art.dispatch[0];
    const Interval box{d0.interval_lo_kw, d0.interval_hi_kw};
    const double p_ref = in.p_ref.values[0];
    CHECK(p_ref == doctest::Approx(in.baseline.values[0] * 0.8));  // square wave starts low

    // One-household sharing iteration written out long-hand.
    double x = 0.0, x_avg = 0.0, shared = p_ref, theta = 0.0;
    int it = 0;
    while (it < 15) {
        const double c = x - x_avg + shared - theta;
        x = std::clamp(c - price, box.lo, box.hi);
        x_avg = x;
        const double prev = shared;
        shared = (2.0 * p_ref + (theta + x_avg)) / 3.0;
        theta += x_avg - shared;
        ++it;
        if (std::abs(x - shared) <= 1e-3 && std::abs(shared - prev) <= 1e-3) break;
    }
    CHECK(art.steps[0].iterations == it);
    CHECK(d0.p_ac_kw == doctest::Approx(x).epsilon(1e-12));
    CHECK(art.steps[0].tracking_error_kw == doctest::Approx(std::abs(x - p_ref)).epsilon(1e-12));

    const double a = std::exp(-(300.0 / 3600.0) / 4.0);
    CHECK(d0.t_in_start_c == 23.0);
    CHECK(d0.t_in_end_c == doctest::Approx(a * 23.0 + (1 - a) * (t_out - 2.5 * 2.0 * x)).epsilon(1e-12));
    CHECK(art.dispatch[1].t_in_start_c == d0.t_in_end_c);

    // The first grid record replays the 30-s sample at t0 with dispatch held.
    const double pv = in.profiles.pv[0].at(t0);
    const double ul = in.profiles.ul[0].at(t0);
    const PQ inj = doe_injection(in.roster[0], pv, ul, x);
    auto set = InjectionSet::zeros(2);
    set.add(1, 0, inj.p, inj.q);
    const auto sol = solve_power_flow(in.admittance, set);
    CHECK(art.grid[0].magnitude_pu[3] == doctest::Approx(sol.magnitude(1, 0)).epsilon(1e-12));
}

TEST_CASE("an aborted run leaves partial files and an incomplete manifest") {
    auto cfg = toy();
    const fs::path env_out = fresh_dir("abort_env");
    run_study(cfg, options(RunMode::EnvelopesOnly, env_out));
    REQUIRE(fs::exists(env_out / "envelopes" / "step_002.jsonl"));
    fs::remove(env_out / "envelopes" / "step_002.jsonl");

    cfg.envelope_dir = env_out / "envelopes";
    const fs::path out = fresh_dir("abort_track");
    CHECK_THROWS_AS(run_study(cfg, options(RunMode::Track, out)), ConfigError);
    const auto manifest = read_manifest(out);
    CHECK(manifest["complete"] == false);
    CHECK(manifest["error"].get<std::string>().find("step_002") != std::string::npos);
    CHECK(read_steps(out).size() == 2);
    CHECK(fs::exists(out / "gridlog" / "voltages.csv"));
}

TEST_CASE("repeat runs write identical files") {
    const auto cfg = toy();
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    run_study(cfg, options(RunMode::Full, a));
    run_study(cfg, options(RunMode::Full, b));
    for (const char* f : {"dispatch/dispatch.csv", "dispatch/steps.csv", "dispatch/convergence.csv", "gridlog/voltages.csv",
                          "envelopes/step_000.jsonl", "envelopes/step_005.jsonl", "profiles.csv"}) {
        INFO(f);
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK_FALSE(slurp(a / f).empty());
    }
}

TEST_CASE("zero regulation follows the baseline") {
    auto cfg = toy();
    cfg.reference.regulation_fraction = 0.0;
    const auto in = prepare_study(cfg);
    CHECK(in.p_ref.values == in.baseline.values);
    const auto art = run_study(cfg);
    CHECK(art.summary.max_tracking_error_kw < 0.01);
    CHECK(art.summary.failed_guarantee_events == 0);
}
