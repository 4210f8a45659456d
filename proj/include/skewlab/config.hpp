#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace skewlab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Flat "section.key = value" settings read from INI text. Typed getters record the
// default they fall back to, so canonical() always lists every value a run used.
class ExperimentConfig {
public:
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& ini_text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    long get_long(const std::string& key, long fallback);
    int get_int(const std::string& key, int fallback);
    bool get_bool(const std::string& key, bool fallback);
    // "1-10" or "1,2,5"; ranges and lists may be mixed.
    std::vector<std::uint64_t> get_seeds(const std::string& key, const std::string& fallback);
    std::vector<double> get_doubles(const std::string& key, const std::string& fallback);

    // Sorted "key = value" lines.
    std::string canonical() const;
    // Lower-case hex SHA-256 of canonical().
    std::string hash() const;
    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::string sha256_hex(const std::string& data);

// Shortest %.15g..%.17g rendering that parses back to the same double.
std::string format_double(double v);

}  // namespace skewlab
