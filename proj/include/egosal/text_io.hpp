#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace egosal {

std::vector<std::string> split_csv(std::string_view line);
std::string_view trim(std::string_view s);

/// Reads a whole CSV file. The first row is the header; rows are returned without it.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name, throws InvalidConfig if absent.
    std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

/// Flat `key = value` text config. `#` starts a comment, blank lines are ignored.
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(std::string_view text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    std::string serialize() const;

private:
    std::map<std::string, std::string> values_;
};

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file then renames, so readers never see a partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace egosal
