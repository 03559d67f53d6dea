#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "doedr/types.hpp"

namespace doedr {

using Matrix3c = Eigen::Matrix3cd;

struct BaseValues {
    double voltage_v = 230.0;     ///< phase-to-neutral
    double power_va = 100'000.0;  ///< per-phase power base

    double impedance_ohm() const { return voltage_v * voltage_v / power_va; }
};

struct LineSpec {
    std::string from;
    std::string to;
    Matrix3c impedance_ohm;  ///< series, Kron-reduced phase frame
};

struct HouseholdConnection {
    std::string household;
    std::string bus;
    std::size_t phase = 0;  ///< 0, 1, 2 for a, b, c
};

/// Unvalidated feeder content, as read from a file or built in code.
struct FeederDescription {
    BaseValues base;
    std::string slack_bus;
    double slack_voltage_pu = 1.0;
    std::vector<std::string> buses;
    std::vector<LineSpec> lines;
    std::vector<HouseholdConnection> households;
};

/// Validated three-phase radial feeder. Immutable once built.
class FeederModel {
  public:
    /// Throws ConfigError naming the offending element when the description
    /// is not radial and connected, maps two households to one (bus, phase),
    /// or carries a singular impedance block.
    static FeederModel build(FeederDescription description);

    const BaseValues& base() const { return d_.base; }
    const std::string& slack_bus() const { return d_.slack_bus; }
    double slack_voltage_pu() const { return d_.slack_voltage_pu; }
    const std::vector<std::string>& buses() const { return d_.buses; }
    const std::vector<LineSpec>& lines() const { return d_.lines; }
    const std::vector<HouseholdConnection>& households() const { return d_.households; }
    const FeederDescription& description() const { return d_; }

    std::size_t bus_index(const std::string& bus) const;
    std::optional<std::size_t> find_household(const std::string& household) const;

  private:
    explicit FeederModel(FeederDescription d);

    FeederDescription d_;
    std::map<std::string, std::size_t> bus_index_;
    std::map<std::string, std::size_t> household_index_;
};

/// Parse the sectioned feeder format ([base], [slack], [buses], [conductors],
/// [lines], [households]) and build the model.
FeederDescription parse_feeder(std::istream& in, const std::string& source_name);
FeederModel load_feeder(const std::filesystem::path& path);
FeederModel build_feeder(FeederDescription description);

/// Write a feeder in the explicit-impedance line form with round-trip precision.
void write_feeder(std::ostream& out, const FeederModel& feeder);

/// Phase-resolved series admittance of each line, plus the tree ordering the
/// sweep solver walks.
class AdmittanceModel {
  public:
    struct Branch {
        std::size_t from = 0;  ///< upstream bus index
        std::size_t to = 0;    ///< downstream bus index
        Matrix3c y_siemens;
        Matrix3c z_pu;
        Matrix3c y_pu;  ///< G + jB blocks in per unit
    };

    std::size_t bus_count() const { return bus_count_; }
    std::size_t slack_index() const { return slack_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const BaseValues& base() const { return base_; }

    /// Balanced slack phasors, angles 0, -120, +120 degrees.
    const std::array<Complex, 3>& slack_voltage() const { return slack_voltage_; }

    /// Buses in breadth-first order from the slack; the slack comes first.
    const std::vector<std::size_t>& sweep_order() const { return order_; }
    /// Branch feeding each bus (index into branches()); unused for the slack.
    std::size_t feeding_branch(std::size_t bus) const { return feeding_branch_[bus]; }

    /// Row/column of a (bus, phase) pair in the stacked 3N nodal system.
    static std::size_t node_index(std::size_t bus, std::size_t phase) { return bus * kPhases + phase; }

  private:
    friend AdmittanceModel assemble_admittance(const FeederModel& feeder);

    std::size_t bus_count_ = 0;
    std::size_t slack_ = 0;
    BaseValues base_;
    std::array<Complex, 3> slack_voltage_{};
    std::vector<Branch> branches_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> feeding_branch_;
};

/// Condition number above which an impedance block is treated as singular.
inline constexpr double kMaxImpedanceCondition = 1e12;

AdmittanceModel assemble_admittance(const FeederModel& feeder);

/// Expand lower-triangular (R, X) pairs r11 x11 r21 x21 r22 x22 r31 x31 r32 x32 r33 x33.
Matrix3c impedance_from_lower_triangle(const std::array<double, 12>& rx);

}  // namespace doedr
