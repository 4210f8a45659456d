#include "skewlab/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace skewlab {

namespace {

void flatten(const boost::property_tree::ptree& tree, const std::string& prefix, std::map<std::string, std::string>& out) {
    for (const auto& [key, child] : tree) {
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        if (child.empty()) out[full] = boost::algorithm::trim_copy(child.data());
        else flatten(child, full, out);
    }
}

template <class T, class Parse>
T parse_value(const std::string& key, const std::string& text, Parse parse) {
    try {
        size_t used = 0;
        const T v = parse(text, &used);
        if (used != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid value for " + key + ": '" + text + "'");
    }
}

long get_long_impl(const std::string& key, const std::string& text) {
    // Accept integral floating notation such as 1e6.
    const double d = parse_value<double>(key, text, [](const std::string& s, size_t* n) { return std::stod(s, n); });
    if (d != static_cast<double>(static_cast<long>(d))) throw ConfigError("expected an integer for " + key);
    return static_cast<long>(d);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& ini_text) {
    boost::property_tree::ptree tree;
    std::istringstream in(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    flatten(tree, "", cfg.values_);
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_string(buf.str());
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError("empty config key");
    values_[key] = boost::algorithm::trim_copy(value);
}

std::string ExperimentConfig::get_string(const std::string& key, const std::string& fallback) {
    auto it = values_.find(key);
    if (it == values_.end()) it = values_.emplace(key, fallback).first;
    return it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) {
    if (!has(key)) {
        values_[key] = format_double(fallback);
        return fallback;
    }
    return parse_value<double>(key, values_[key], [](const std::string& s, size_t* n) { return std::stod(s, n); });
}

long ExperimentConfig::get_long(const std::string& key, long fallback) {
    if (!has(key)) {
        values_[key] = std::to_string(fallback);
        return fallback;
    }
    return get_long_impl(key, values_[key]);
}

int ExperimentConfig::get_int(const std::string& key, int fallback) {
    return static_cast<int>(get_long(key, fallback));
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) {
    const std::string v = boost::algorithm::to_lower_copy(get_string(key, fallback ? "true" : "false"));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected a boolean for " + key);
}

std::vector<std::uint64_t> ExperimentConfig::get_seeds(const std::string& key, const std::string& fallback) {
    const std::string text = get_string(key, fallback);
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
    std::vector<std::uint64_t> out;
    auto num = [&](const std::string& s) {
        return parse_value<std::uint64_t>(key, boost::algorithm::trim_copy(s),
                                          [](const std::string& t, size_t* n) { return std::stoull(t, n); });
    };
    for (const auto& p : parts) {
        if (boost::algorithm::trim_copy(p).empty()) continue;
        const auto dash = p.find('-');
        if (dash == std::string::npos) {
            out.push_back(num(p));
        } else {
            const std::uint64_t a = num(p.substr(0, dash)), b = num(p.substr(dash + 1));
            if (b < a) throw ConfigError("descending seed range in " + key);
            for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
        }
    }
    if (out.empty()) throw ConfigError("no seeds in " + key);
    return out;
}

std::vector<double> ExperimentConfig::get_doubles(const std::string& key, const std::string& fallback) {
    const std::string text = get_string(key, fallback);
    std::vector<std::string> parts;
    boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
    std::vector<double> out;
    for (const auto& p : parts) {
        const std::string t = boost::algorithm::trim_copy(p);
        if (t.empty()) continue;
        out.push_back(parse_value<double>(key, t, [](const std::string& s, size_t* n) { return std::stod(s, n); }));
    }
    return out;
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(canonical()); }

std::string format_double(double v) {
    char buf[64];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

}  // namespace skewlab
