#pragma once

// Run records and the on-disk results layout:
//
//   manifest.json              config, seed, summary, completion flag, timings
//   profiles.csv               exogenous inputs as used (profile file format)
//   envelopes/step_NNN.jsonl   one record per DOE household
//   gridlog/voltages.csv       |V| per (bus, phase) at every grid record
//   dispatch/dispatch.csv      per control step and DOE household
//   dispatch/steps.csv         per control step aggregates
//   dispatch/convergence.csv   ADMM termination per control step
//   dispatch/curtailment.csv   static-limit actions per grid record

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "doedr/admm.hpp"
#include "doedr/envelope.hpp"
#include "doedr/profiles.hpp"

namespace doedr {

struct StepRecord {
    int step = 0;
    long time_s = 0;
    double p_ref_kw = 0.0;
    double p_total_kw = 0.0;
    double tracking_error_kw = 0.0;
    double feasible_lo_kw = 0.0;  ///< sum of the households' interval bounds
    double feasible_hi_kw = 0.0;
    bool reference_feasible = true;
    int iterations = 0;
    double primal_norm = 0.0;
    double dual_norm = 0.0;
    StopReason stop = StopReason::MaxIterations;
    std::size_t scenarios_feasible = 0;
    std::size_t scenarios_divergent = 0;
    std::size_t scenarios_violating = 0;
    std::size_t fallbacks = 0;
};

struct DispatchRecord {
    int step = 0;
    long time_s = 0;
    std::string household;
    double p_ac_kw = 0.0;
    double interval_lo_kw = 0.0;
    double interval_hi_kw = 0.0;
    double p_inj_kw = 0.0;  ///< at the step-mean exogenous inputs
    double q_inj_kvar = 0.0;
    double t_in_start_c = 0.0;
    double t_in_end_c = 0.0;
    std::string conflict = "none";
    std::size_t dropped_rows = 0;
};

struct GridRecord {
    std::size_t record = 0;
    int step = 0;
    long time_s = 0;
    bool converged = true;
    std::size_t violations = 0;
    std::vector<double> magnitude_pu;  ///< bus-major, 3 per bus; empty when diverged
};

struct CurtailmentRecord {
    std::size_t record = 0;
    long time_s = 0;
    std::string household;
    double pv_avail_kw = 0.0;
    double pv_used_kw = 0.0;
    double curtailed_kw = 0.0;
    double p_inj_kw = 0.0;
    bool import_violation = false;
};

struct RunSummary {
    std::size_t control_steps = 0;
    std::size_t grid_records = 0;
    double max_tracking_error_kw = 0.0;
    double max_tracking_error_feasible_kw = 0.0;  ///< over steps with a feasible reference
    std::size_t infeasible_reference_steps = 0;
    double v_min_pu = 0.0;
    double v_max_pu = 0.0;
    std::size_t failed_guarantee_events = 0;
    double t_in_min_c = 0.0;
    double t_in_max_c = 0.0;
    std::size_t comfort_fallbacks = 0;
    std::size_t envelope_conflicts = 0;
    std::size_t degenerate_envelopes = 0;
    double max_envelope_violation = 0.0;  ///< max over feasible samples of A x - b
    std::size_t curtailment_events = 0;
    double curtailed_kwh = 0.0;
    std::size_t import_violations = 0;
    std::size_t maxiter_steps = 0;
    double mean_step_wall_s = 0.0;
    double max_step_wall_s = 0.0;
};

nlohmann::ordered_json to_json(const RunSummary& summary);

struct RunArtifacts {
    nlohmann::ordered_json config;  ///< resolved study configuration
    std::uint64_t seed = 0;
    std::string mode = "run";
    bool complete = false;
    std::string error;

    std::vector<std::string> bus_labels;  ///< "<bus>.<phase>", bus-major
    std::optional<ProfileSet> profiles;
    std::vector<std::vector<EnvelopePolytope>> envelopes;  ///< per control step
    std::vector<StepRecord> steps;
    std::vector<DispatchRecord> dispatch;
    std::vector<GridRecord> grid;
    std::vector<CurtailmentRecord> curtailment;
    std::vector<double> step_wall_s;
    std::vector<std::string> warnings;
    RunSummary summary;

    std::string started_utc;
    std::string finished_utc;
};

/// One JSON object per line, fields in a fixed order.
void write_envelopes(std::ostream& out, const std::vector<EnvelopePolytope>& envelopes);
std::vector<EnvelopePolytope> read_envelopes(std::istream& in, const std::string& source = "<stream>");
std::vector<EnvelopePolytope> read_envelopes(const std::filesystem::path& path);

std::string envelope_file_name(int step);

/// Write every artifact present. Throws IoError when the directory or a file
/// cannot be written.
void persist_results(const RunArtifacts& artifacts, const std::filesystem::path& out_dir);

/// Control-step records of a results directory (steps.csv joined with convergence.csv).
std::vector<StepRecord> read_steps(const std::filesystem::path& out_dir);
nlohmann::ordered_json read_manifest(const std::filesystem::path& out_dir);

std::string utc_timestamp();

}  // namespace doedr
