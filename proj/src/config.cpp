#include "tnvae/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tnvae/error.hpp"

namespace tnvae {

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(std::string_view s)
{
    const std::string t = trim(s);
    double v = 0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (!t.empty() && *begin == '+')
        ++begin;
    const auto res = std::from_chars(begin, end, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != end)
        throw DataError("not a number: '" + t + "'");
    return v;
}

std::int64_t parse_int(std::string_view s)
{
    const std::string t = trim(s);
    std::int64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw DataError("not an integer: '" + t + "'");
    return v;
}

std::uint64_t parse_uint(std::string_view s)
{
    const std::string t = trim(s);
    std::uint64_t v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
        throw DataError("not an unsigned integer: '" + t + "'");
    return v;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& origin)
{
    KeyValueConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        const std::string t = trim(line);
        if (t.empty())
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        cfg.set(key, trim(std::string_view(t).substr(eq + 1)));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

bool KeyValueConfig::contains(const std::string& key) const { return values_.count(key) != 0; }

const std::string& KeyValueConfig::get(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError("missing key '" + key + "'");
    return it->second;
}

std::string KeyValueConfig::get_or(const std::string& key, const std::string& fallback) const
{
    return contains(key) ? get(key) : fallback;
}

namespace {

template <typename F>
auto convert(const std::string& key, const std::string& value, F&& f)
{
    try {
        return f(value);
    } catch (const DataError& e) {
        throw ConfigError("key '" + key + "': " + e.what());
    }
}

} // namespace

double KeyValueConfig::get_double(const std::string& key, double fallback) const
{
    return contains(key) ? convert(key, get(key), [](const std::string& v) { return parse_double(v); }) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const
{
    return contains(key) ? convert(key, get(key), [](const std::string& v) { return parse_int(v); }) : fallback;
}

std::uint64_t KeyValueConfig::get_uint(const std::string& key, std::uint64_t fallback) const
{
    return contains(key) ? convert(key, get(key), [](const std::string& v) { return parse_uint(v); }) : fallback;
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key) const
{
    std::string v = trim(get(key));
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
        v = v.substr(1, v.size() - 2);
    } else {
        return {v};
    }
    std::vector<std::string> items;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::string t = trim(item);
        if (!t.empty())
            items.push_back(std::move(t));
    }
    return items;
}

void KeyValueConfig::set(const std::string& key, const std::string& value)
{
    if (!contains(key))
        order_.push_back(key);
    values_[key] = value;
}

void KeyValueConfig::apply_override(std::string_view assignment, const std::vector<std::string>& allowed)
{
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos)
        throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    const std::string key = trim(assignment.substr(0, eq));
    if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ConfigError("override references undeclared key '" + key + "'");
    set(key, trim(assignment.substr(eq + 1)));
}

std::string KeyValueConfig::to_string() const
{
    std::string out;
    for (const std::string& k : order_)
        out += k + " = " + values_.at(k) + "\n";
    return out;
}

std::string format_list(const std::vector<std::string>& items)
{
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i)
            out += ", ";
        out += items[i];
    }
    return out + "]";
}

} // namespace tnvae
