#include "doedr/feeder.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "doedr/error.hpp"
#include "doedr/textconfig.hpp"

namespace doedr {

namespace {

double condition_number(const Matrix3c& m) {
    Eigen::JacobiSVD<Matrix3c> svd(m);
    const auto& s = svd.singularValues();
    if (!(s(2) > 0.0)) return std::numeric_limits<double>::infinity();
    return s(0) / s(2);
}

std::string line_name(const LineSpec& line) { return fmt::format("{}-{}", line.from, line.to); }

std::size_t parse_phase(const std::string& token, const std::string& context) {
    if (token.size() == 1) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(token[0])));
        if (c >= 'a' && c <= 'c') return static_cast<std::size_t>(c - 'a');
    }
    throw ConfigError(fmt::format("{} phase must be a, b or c, got '{}'", context, token));
}

struct DisjointSet {
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t root(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = root(a);
        b = root(b);
        if (a == b) return false;
        parent[a] = b;
        return true;
    }
    std::vector<std::size_t> parent;
};

}  // namespace

Matrix3c impedance_from_lower_triangle(const std::array<double, 12>& rx) {
    Matrix3c z;
    std::size_t k = 0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j <= i; ++j) {
            const Complex v{rx[k], rx[k + 1]};
            k += 2;
            z(i, j) = v;
            z(j, i) = v;
        }
    }
    return z;
}

FeederModel::FeederModel(FeederDescription d) : d_(std::move(d)) {}

FeederModel FeederModel::build(FeederDescription d) {
    if (d.base.voltage_v <= 0.0 || d.base.power_va <= 0.0) {
        throw ConfigError("feeder base voltage and power must be positive");
    }
    if (!(d.slack_voltage_pu > 0.0)) throw ConfigError("slack voltage must be positive");
    if (d.buses.empty()) throw ConfigError("feeder has no buses");

    FeederModel model(std::move(d));
    const auto& fd = model.d_;
    for (std::size_t i = 0; i < fd.buses.size(); ++i) {
        if (!model.bus_index_.emplace(fd.buses[i], i).second) {
            throw ConfigError(fmt::format("duplicate bus '{}'", fd.buses[i]));
        }
    }
    if (!model.bus_index_.contains(fd.slack_bus)) {
        throw ConfigError(fmt::format("slack bus '{}' is not a listed bus", fd.slack_bus));
    }

    DisjointSet sets(fd.buses.size());
    for (const auto& line : fd.lines) {
        const auto from = model.bus_index_.find(line.from);
        const auto to = model.bus_index_.find(line.to);
        if (from == model.bus_index_.end() || to == model.bus_index_.end()) {
            throw ConfigError(fmt::format("line {} references an unknown bus", line_name(line)));
        }
        if (from->second == to->second) {
            throw ConfigError(fmt::format("non-radial feeder: line {} is a self loop", line_name(line)));
        }
        if (!sets.unite(from->second, to->second)) {
            throw ConfigError(fmt::format("non-radial feeder: line {} closes a loop", line_name(line)));
        }
        if (!line.impedance_ohm.allFinite()) {
            throw ConfigError(fmt::format("line {} has a non-finite impedance", line_name(line)));
        }
        const double scale = line.impedance_ohm.cwiseAbs().maxCoeff();
        if ((line.impedance_ohm - line.impedance_ohm.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw ConfigError(fmt::format("line {} impedance matrix is not symmetric", line_name(line)));
        }
        if (condition_number(line.impedance_ohm) > kMaxImpedanceCondition) {
            throw ConfigError(fmt::format("line {} has a singular impedance matrix", line_name(line)));
        }
    }
    const std::size_t slack = model.bus_index_.at(fd.slack_bus);
    for (std::size_t i = 0; i < fd.buses.size(); ++i) {
        if (sets.root(i) != sets.root(slack)) {
            throw ConfigError(fmt::format("non-radial feeder: bus '{}' is not connected to the slack", fd.buses[i]));
        }
    }

    std::set<std::pair<std::size_t, std::size_t>> taken;
    for (std::size_t k = 0; k < fd.households.size(); ++k) {
        const auto& h = fd.households[k];
        const auto bus = model.bus_index_.find(h.bus);
        if (bus == model.bus_index_.end()) {
            throw ConfigError(fmt::format("household '{}' references unknown bus '{}'", h.household, h.bus));
        }
        if (bus->second == slack) {
            throw ConfigError(fmt::format("household '{}' is connected to the slack bus", h.household));
        }
        if (h.phase >= kPhases) throw ConfigError(fmt::format("household '{}' has an invalid phase", h.household));
        if (!taken.emplace(bus->second, h.phase).second) {
            throw ConfigError(fmt::format("duplicate assignment: household '{}' at bus '{}' phase {}", h.household,
                                          h.bus, phase_letter(h.phase)));
        }
        if (!model.household_index_.emplace(h.household, k).second) {
            throw ConfigError(fmt::format("duplicate household id '{}'", h.household));
        }
    }
    return model;
}

std::size_t FeederModel::bus_index(const std::string& bus) const {
    const auto it = bus_index_.find(bus);
    if (it == bus_index_.end()) throw InputError(fmt::format("unknown bus '{}'", bus));
    return it->second;
}

std::optional<std::size_t> FeederModel::find_household(const std::string& household) const {
    const auto it = household_index_.find(household);
    if (it == household_index_.end()) return std::nullopt;
    return it->second;
}

FeederModel build_feeder(FeederDescription description) { return FeederModel::build(std::move(description)); }

FeederDescription parse_feeder(std::istream& in, const std::string& source_name) {
    const TextConfig cfg = TextConfig::parse(in, source_name);
    FeederDescription d;

    if (const auto* base = cfg.find("base")) {
        d.base.voltage_v = base->get_double("voltage_v", d.base.voltage_v);
        d.base.power_va = base->get_double("power_va", d.base.power_va);
    }
    const auto& slack = cfg.require("slack");
    d.slack_bus = slack.get_string("bus");
    d.slack_voltage_pu = slack.get_double("voltage_pu", 1.0);

    for (const auto& row : cfg.require("buses").rows()) {
        for (const auto& tok : row.tokens) d.buses.push_back(tok);
    }

    std::map<std::string, Matrix3c> conductors;  // ohm per km
    if (const auto* sec = cfg.find("conductors")) {
        for (const auto& row : sec->rows()) {
            const auto where = sec->where(row.line);
            if (row.tokens.size() != 13) {
                throw ConfigError(fmt::format("{} conductor row needs a name and 12 values", where));
            }
            std::array<double, 12> rx{};
            for (std::size_t i = 0; i < 12; ++i) rx[i] = parse_double(row.tokens[i + 1], where);
            if (!conductors.emplace(row.tokens[0], impedance_from_lower_triangle(rx)).second) {
                throw ConfigError(fmt::format("{} duplicate conductor '{}'", where, row.tokens[0]));
            }
        }
    }

    const auto& lines = cfg.require("lines");
    for (const auto& row : lines.rows()) {
        const auto where = lines.where(row.line);
        LineSpec line;
        if (row.tokens.size() == 4) {
            line.from = row.tokens[0];
            line.to = row.tokens[1];
            const double length_m = parse_double(row.tokens[2], where);
            if (!(length_m > 0.0)) throw ConfigError(fmt::format("{} line length must be positive", where));
            const auto it = conductors.find(row.tokens[3]);
            if (it == conductors.end()) {
                throw ConfigError(fmt::format("{} unknown conductor '{}'", where, row.tokens[3]));
            }
            line.impedance_ohm = it->second * (length_m / 1000.0);
        } else if (row.tokens.size() == 14) {
            line.from = row.tokens[0];
            line.to = row.tokens[1];
            std::array<double, 12> rx{};
            for (std::size_t i = 0; i < 12; ++i) rx[i] = parse_double(row.tokens[i + 2], where);
            line.impedance_ohm = impedance_from_lower_triangle(rx);
        } else {
            throw ConfigError(
                fmt::format("{} line row must be 'from to length_m conductor' or 'from to' + 12 values", where));
        }
        d.lines.push_back(std::move(line));
    }

    if (const auto* sec = cfg.find("households")) {
        for (const auto& row : sec->rows()) {
            const auto where = sec->where(row.line);
            if (row.tokens.size() != 3) throw ConfigError(fmt::format("{} household row is 'id bus phase'", where));
            d.households.push_back({row.tokens[0], row.tokens[1], parse_phase(row.tokens[2], where)});
        }
    }
    return d;
}

FeederModel load_feeder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open feeder file '{}'", path.string()));
    return build_feeder(parse_feeder(in, path.string()));
}

void write_feeder(std::ostream& out, const FeederModel& feeder) {
    out << "[base]\n";
    out << fmt::format("voltage_v = {}\npower_va = {}\n\n", feeder.base().voltage_v, feeder.base().power_va);
    out << "[slack]\n";
    out << fmt::format("bus = {}\nvoltage_pu = {}\n\n", feeder.slack_bus(), feeder.slack_voltage_pu());
    out << "[buses]\n";
    for (const auto& b : feeder.buses()) out << b << '\n';
    out << "\n[lines]\n# from to  r11 x11  r21 x21 r22 x22  r31 x31 r32 x32 r33 x33  (ohm)\n";
    for (const auto& line : feeder.lines()) {
        out << line.from << ' ' << line.to;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j <= i; ++j) {
                const Complex z = line.impedance_ohm(i, j);
                out << fmt::format(" {} {}", z.real(), z.imag());
            }
        }
        out << '\n';
    }
    out << "\n[households]\n";
    for (const auto& h : feeder.households()) {
        out << fmt::format("{} {} {}\n", h.household, h.bus, phase_letter(h.phase));
    }
}

AdmittanceModel assemble_admittance(const FeederModel& feeder) {
    AdmittanceModel adm;
    const std::size_t n = feeder.buses().size();
    adm.bus_count_ = n;
    adm.slack_ = feeder.bus_index(feeder.slack_bus());
    adm.base_ = feeder.base();

    const double pi = std::acos(-1.0);
    const double vmag = feeder.slack_voltage_pu();
    adm.slack_voltage_ = {std::polar(vmag, 0.0), std::polar(vmag, -2.0 * pi / 3.0), std::polar(vmag, 2.0 * pi / 3.0)};

    const double z_base = feeder.base().impedance_ohm();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacent(n);  // (neighbour, line)
    for (std::size_t k = 0; k < feeder.lines().size(); ++k) {
        const auto& line = feeder.lines()[k];
        if (condition_number(line.impedance_ohm) > kMaxImpedanceCondition) {
            throw ConfigError(fmt::format("line {} has a numerically singular impedance matrix", line_name(line)));
        }
        const std::size_t a = feeder.bus_index(line.from);
        const std::size_t b = feeder.bus_index(line.to);
        adjacent[a].emplace_back(b, k);
        adjacent[b].emplace_back(a, k);
    }

    // Orient every line away from the slack.
    adm.branches_.resize(feeder.lines().size());
    adm.feeding_branch_.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(adm.slack_);
    seen[adm.slack_] = true;
    while (!frontier.empty()) {
        const std::size_t bus = frontier.front();
        frontier.pop();
        adm.order_.push_back(bus);
        for (const auto& [next, k] : adjacent[bus]) {
            if (seen[next]) continue;
            seen[next] = true;
            const Matrix3c& z = feeder.lines()[k].impedance_ohm;
            auto& br = adm.branches_[k];
            br.from = bus;
            br.to = next;
            br.y_siemens = z.inverse();
            br.z_pu = z / z_base;
            br.y_pu = br.z_pu.inverse();
            adm.feeding_branch_[next] = k;
            frontier.push(next);
        }
    }
    return adm;
}

}  // namespace doedr
