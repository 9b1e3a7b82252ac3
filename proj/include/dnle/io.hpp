#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dnle/errors.hpp"

namespace dnle::io {

/// Flat `key = value` configuration with dotted section prefixes. `#` starts a comment.
class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            if (cfg.values_.count(key)) throw ConfigError("duplicate key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
        return it->second;
    }

    std::string get(const std::string& key, const std::string& fallback) const {
        return has(key) ? get(key) : fallback;
    }

    double number(const std::string& key) const { return to_number(key, get(key)); }
    double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    long integer(const std::string& key) const {
        const double x = number(key);
        if (x != double(long(x))) throw ConfigError("key '" + key + "' must be an integer");
        return long(x);
    }
    long integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto v = get(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("key '" + key + "' must be a boolean");
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    static double to_number(const std::string& key, const std::string& v) {
        std::size_t used = 0;
        double x = 0.0;
        try {
            x = std::stod(v, &used);
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "' is not a number: '" + v + "'");
        }
        if (used != v.size()) throw ConfigError("key '" + key + "' is not a number: '" + v + "'");
        return x;
    }

    std::map<std::string, std::string> values_;
};

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Column-major numeric table with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

    void add(std::string name, std::vector<double> values) {
        if (!columns.empty() && values.size() != rows())
            throw InvalidArgument("column '" + name + "' has " + std::to_string(values.size()) + " rows, expected " +
                                  std::to_string(rows()));
        header.push_back(std::move(name));
        columns.push_back(std::move(values));
    }

    const std::vector<double>& column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return columns[j];
        throw InvalidArgument("no column '" + name + "'");
    }
};

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t j = 0; j < t.header.size(); ++j) out += (j ? "," : "") + t.header[j];
    out += '\n';
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.columns.size(); ++j) out += (j ? "," : "") + format_double(t.columns[j][i]);
        out += '\n';
    }
    return out;
}

inline Table parse_csv(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("empty CSV");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    }
    t.columns.assign(t.header.size(), {});
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t j = 0;
        while (std::getline(ls, cell, ',')) {
            if (j >= t.columns.size()) throw ConfigError("CSV line " + std::to_string(lineno) + " has too many cells");
            try {
                t.columns[j].push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            ++j;
        }
        if (j != t.columns.size()) throw ConfigError("CSV line " + std::to_string(lineno) + " has too few cells");
    }
    return t;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_csv(const std::string& path, const Table& t) { write_text(path, to_csv(t)); }
inline Table read_csv(const std::string& path) { return parse_csv(read_text(path)); }

}  // namespace dnle::io
