#include "doedr/textconfig.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "doedr/error.hpp"

namespace doedr {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

}  // namespace

double parse_double(const std::string& token, const std::string& context) {
    double value = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ConfigError(fmt::format("{}: expected a finite number, got '{}'", context, token));
    }
    return value;
}

long parse_int(const std::string& token, const std::string& context) {
    long value = 0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError(fmt::format("{}: expected an integer, got '{}'", context, token));
    }
    return value;
}

long parse_clock(const std::string& token, const std::string& context) {
    int h = 0, m = 0, s = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(token);
    in >> h >> c1 >> m;
    if (!in || c1 != ':') throw ConfigError(fmt::format("{}: expected HH:MM, got '{}'", context, token));
    if (in >> c2) {
        if (c2 != ':' || !(in >> s)) throw ConfigError(fmt::format("{}: expected HH:MM:SS, got '{}'", context, token));
    }
    if (h < 0 || h > 48 || m < 0 || m > 59 || s < 0 || s > 59) {
        throw ConfigError(fmt::format("{}: clock value out of range '{}'", context, token));
    }
    return h * 3600L + m * 60L + s;
}

std::string format_clock(long seconds) {
    const long h = seconds / 3600;
    const long m = (seconds % 3600) / 60;
    const long s = seconds % 60;
    if (s == 0) return fmt::format("{:02d}:{:02d}", h, m);
    return fmt::format("{:02d}:{:02d}:{:02d}", h, m, s);
}

void ConfigSection::add_entry(ConfigEntry entry) {
    if (lookup(entry.key) != nullptr) {
        throw ConfigError(fmt::format("{} duplicate key '{}' in [{}]", where(entry.line), entry.key, name_));
    }
    entries_.push_back(std::move(entry));
}

const ConfigEntry* ConfigSection::lookup(const std::string& key) const {
    for (const auto& e : entries_) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

bool ConfigSection::has(const std::string& key) const { return lookup(key) != nullptr; }

std::optional<std::string> ConfigSection::find(const std::string& key) const {
    if (const auto* e = lookup(key)) return e->value;
    return std::nullopt;
}

std::string ConfigSection::where(int line) const { return fmt::format("{}:{}:", source_, line); }

std::string ConfigSection::get_string(const std::string& key) const {
    const auto* e = lookup(key);
    if (e == nullptr) throw ConfigError(fmt::format("{}: missing key '{}' in [{}]", source_, key, name_));
    return e->value;
}

std::string ConfigSection::get_string(const std::string& key, const std::string& fallback) const {
    const auto* e = lookup(key);
    return e ? e->value : fallback;
}

double ConfigSection::get_double(const std::string& key) const {
    const auto* e = lookup(key);
    if (e == nullptr) throw ConfigError(fmt::format("{}: missing key '{}' in [{}]", source_, key, name_));
    return parse_double(e->value, fmt::format("{} [{}] {}", where(e->line), name_, key));
}

double ConfigSection::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long ConfigSection::get_int(const std::string& key) const {
    const auto* e = lookup(key);
    if (e == nullptr) throw ConfigError(fmt::format("{}: missing key '{}' in [{}]", source_, key, name_));
    return parse_int(e->value, fmt::format("{} [{}] {}", where(e->line), name_, key));
}

long ConfigSection::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

TextConfig TextConfig::parse(std::istream& in, const std::string& source_name) {
    TextConfig cfg;
    cfg.source_ = source_name;
    ConfigSection* current = nullptr;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(fmt::format("{}:{}: unterminated section header", source_name, line_no));
            }
            std::string name = trim(line.substr(1, line.size() - 2));
            for (const auto& s : cfg.sections_) {
                if (s.name() == name) {
                    throw ConfigError(fmt::format("{}:{}: duplicate section [{}]", source_name, line_no, name));
                }
            }
            cfg.sections_.emplace_back(std::move(name), source_name);
            current = &cfg.sections_.back();
            continue;
        }
        if (current == nullptr) {
            throw ConfigError(fmt::format("{}:{}: content before first section", source_name, line_no));
        }
        if (const auto eq = line.find('='); eq != std::string::npos) {
            std::string key = trim(line.substr(0, eq));
            std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", source_name, line_no));
            current->add_entry({std::move(key), std::move(value), line_no});
        } else {
            current->add_row({split_ws(line), line_no});
        }
    }
    return cfg;
}

TextConfig TextConfig::parse_string(const std::string& text, const std::string& source_name) {
    std::istringstream in(text);
    return parse(in, source_name);
}

TextConfig TextConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    return parse(in, path.string());
}

const ConfigSection* TextConfig::find(const std::string& name) const {
    for (const auto& s : sections_) {
        if (s.name() == name) return &s;
    }
    return nullptr;
}

const ConfigSection& TextConfig::require(const std::string& name) const {
    const auto* s = find(name);
    if (s == nullptr) throw ConfigError(fmt::format("{}: missing section [{}]", source_, name));
    return *s;
}

}  // namespace doedr
