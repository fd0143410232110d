#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tnvae {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

std::string trim(std::string_view s);

/// Flat declarative config: `key = value` lines, `#` comments, array values
/// written as `[a, b, c]`. Keys keep their first-seen order.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& origin = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool contains(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;

    /// Array value; a scalar value reads as a one-element array.
    std::vector<std::string> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value);

    /// Applies a `key=value` override. Unknown keys are rejected when
    /// `allowed` is non-empty.
    void apply_override(std::string_view assignment, const std::vector<std::string>& allowed = {});

    const std::vector<std::string>& keys() const { return order_; }
    std::string to_string() const;

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

std::string format_list(const std::vector<std::string>& items);

} // namespace tnvae
