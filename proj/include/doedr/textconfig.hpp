#pragma once

// Sectioned plain-text configuration shared by feeder and study files:
//
//   # comment
//   [section]
//   key = value          <- key/value entry
//   tok tok tok          <- tabular row (whitespace separated)
//
// Sections may repeat keys only if the caller reads rows; a duplicated key is
// rejected at parse time.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace doedr {

struct ConfigRow {
    std::vector<std::string> tokens;
    int line = 0;
};

struct ConfigEntry {
    std::string key;
    std::string value;
    int line = 0;
};

class ConfigSection {
  public:
    ConfigSection(std::string name, std::string source) : name_(std::move(name)), source_(std::move(source)) {}

    const std::string& name() const { return name_; }
    const std::vector<ConfigRow>& rows() const { return rows_; }
    const std::vector<ConfigEntry>& entries() const { return entries_; }

    bool has(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key) const;
    long get_int(const std::string& key, long fallback) const;

    /// "file:line:" prefix for diagnostics.
    std::string where(int line) const;

    void add_row(ConfigRow row) { rows_.push_back(std::move(row)); }
    void add_entry(ConfigEntry entry);

  private:
    const ConfigEntry* lookup(const std::string& key) const;

    std::string name_;
    std::string source_;
    std::vector<ConfigRow> rows_;
    std::vector<ConfigEntry> entries_;
};

class TextConfig {
  public:
    static TextConfig parse(std::istream& in, const std::string& source_name);
    static TextConfig parse_string(const std::string& text, const std::string& source_name = "<string>");
    static TextConfig load(const std::filesystem::path& path);

    const ConfigSection* find(const std::string& name) const;
    const ConfigSection& require(const std::string& name) const;
    const std::vector<ConfigSection>& sections() const { return sections_; }
    const std::string& source() const { return source_; }

  private:
    std::string source_;
    std::vector<ConfigSection> sections_;
};

/// Strict numeric conversions; throw ConfigError naming `context` on failure.
double parse_double(const std::string& token, const std::string& context);
long parse_int(const std::string& token, const std::string& context);

/// "HH:MM" or "HH:MM:SS" to seconds after midnight.
long parse_clock(const std::string& token, const std::string& context);
std::string format_clock(long seconds);

}  // namespace doedr
