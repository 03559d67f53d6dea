#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "doedr/admm.hpp"
#include "doedr/envelope.hpp"
#include "doedr/feeder.hpp"
#include "doedr/household.hpp"
#include "doedr/powerflow.hpp"
#include "doedr/profiles.hpp"
#include "doedr/results.hpp"
#include "doedr/textconfig.hpp"

namespace doedr {

/// How the household roster is drawn when the study does not list it.
struct RosterSpec {
    std::size_t doe = 30;
    std::size_t non_doe = 16;
    std::size_t passive = 56;
    std::vector<double> pv_ratings_kw{3.0, 3.6, 4.0, 5.0, 6.0, 8.0};
    std::array<double, 2> ac_rating_kw{2.5, 3.5};  ///< uniform range
    std::array<double, 2> resistance{1.5, 2.5};
    std::array<double, 2> capacitance{1.5, 2.5};
    double cop = 2.5;
};

/// One explicit household row of a study file.
struct RosterEntry {
    std::string id;
    HouseholdClass cls = HouseholdClass::Passive;
    double pv_rating_kw = 0.0;
    double ac_rating_kw = 0.0;
    double resistance = 2.0;
    double capacitance = 2.0;
};

struct StudyConfig {
    std::filesystem::path feeder_path;
    std::uint64_t seed = 7;

    long start_s = 10 * 3600;
    long end_s = 12 * 3600;
    long control_step_s = 300;
    long grid_step_s = 30;

    VoltageBand band;
    SolverOptions solver;
    std::size_t scenarios = 500;
    AdmmConfig admm;

    RosterSpec roster;
    std::vector<RosterEntry> households;  ///< overrides `roster` when non-empty
    ComfortBand comfort;
    double initial_indoor_c = 23.0;
    double import_limit_kw = 10.0;
    double export_limit_kw = 5.0;

    std::optional<std::filesystem::path> profile_path;  ///< synthetic when empty
    SyntheticSpec synthetic;
    ReferenceSpec reference;
    double baseline_setpoint_c = 23.0;

    std::optional<std::filesystem::path> envelope_dir;  ///< track mode input

    /// Throws ConfigError on inconsistent cadence, window or parameters.
    void validate() const;
    std::size_t control_steps() const { return static_cast<std::size_t>((end_s - start_s) / control_step_s); }
    std::size_t substeps() const { return static_cast<std::size_t>(control_step_s / grid_step_s); }

    nlohmann::ordered_json to_json() const;
};

/// Parse a study file. Relative paths resolve against the file's directory.
StudyConfig parse_study(const TextConfig& config, const std::filesystem::path& base_dir);
StudyConfig load_study(const std::filesystem::path& path);

/// Household specs in feeder order. Explicit entries are taken as given;
/// otherwise classes, PV ratings and AC/thermal parameters are drawn from `seed`.
std::vector<HouseholdSpec> build_roster(const StudyConfig& cfg, const FeederModel& feeder);

enum class RunMode { Full, EnvelopesOnly, Track };
std::string_view to_string(RunMode mode);

struct RunOptions {
    RunMode mode = RunMode::Full;
    /// Results directory; written on success and, flagged incomplete, on abort.
    std::optional<std::filesystem::path> out_dir;
    /// Keep feasible sample points per step to check envelope containment.
    bool check_containment = true;
    std::function<void(const StepRecord&, double wall_s)> on_step;
};

/// The closed loop over the DR window. Propagates module errors; voltage
/// violations on the grid evaluator are counted, not raised.
RunArtifacts run_study(const StudyConfig& cfg, const RunOptions& options = {});

/// Everything the loop derives from the config before stepping.
struct StudyInputs {
    FeederModel feeder;
    AdmittanceModel admittance;
    std::vector<HouseholdSpec> roster;
    ProfileSet profiles;
    TimeSeriesProfile p_ref;     ///< per control step
    TimeSeriesProfile baseline;  ///< per control step
};
StudyInputs prepare_study(const StudyConfig& cfg);

}  // namespace doedr
