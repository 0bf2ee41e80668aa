#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace deltabench::csv {

/// Shortest decimal representation that parses back to the same double.
/// NaN is written as an empty field.
inline std::string format(double v) {
    if (std::isnan(v)) return {};
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format(std::int64_t v) { return std::to_string(v); }

inline double parse_double(std::string_view s, std::string_view column = {}) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw InputError("malformed number '" + std::string(s) + "' in column '" +
                         std::string(column) + "'");
    return v;
}

inline std::int64_t parse_int(std::string_view s, std::string_view column = {}) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw InputError("malformed integer '" + std::string(s) + "' in column '" +
                         std::string(column) + "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}

    Writer& header(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (i) os_ << ',';
            os_ << names[i];
        }
        os_ << '\n';
        return *this;
    }

    template <typename T>
    Writer& field(const T& v) {
        if (!first_) os_ << ',';
        first_ = false;
        if constexpr (std::is_floating_point_v<T>)
            os_ << format(static_cast<double>(v));
        else if constexpr (std::is_integral_v<T>)
            os_ << format(static_cast<std::int64_t>(v));
        else
            os_ << v;
        return *this;
    }

    void end_row() {
        os_ << '\n';
        first_ = true;
    }

private:
    std::ostream& os_;
    bool first_ = true;
};

/// Whole-file reader keyed by header names.
class Table {
public:
    static Table read(std::istream& is, std::string_view source = "csv") {
        Table t;
        t.source_ = std::string(source);
        std::string line;
        if (!std::getline(is, line)) throw InputError(t.source_ + ": missing header row");
        strip_cr(line);
        if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        for (auto name : split(line)) t.columns_.emplace_back(name);
        for (std::size_t i = 0; i < t.columns_.size(); ++i) t.index_[t.columns_[i]] = i;
        std::size_t lineno = 1;
        while (std::getline(is, line)) {
            ++lineno;
            strip_cr(line);
            if (line.empty()) continue;
            auto parts = split(line);
            if (parts.size() != t.columns_.size())
                throw InputError(t.source_ + ": line " + std::to_string(lineno) + " has " +
                                 std::to_string(parts.size()) + " fields, expected " +
                                 std::to_string(t.columns_.size()));
            std::vector<std::string> row(parts.begin(), parts.end());
            t.rows_.push_back(std::move(row));
        }
        return t;
    }

    static Table read_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open " + path);
        return read(in, path);
    }

    bool has(std::string_view column) const { return index_.count(std::string(column)) > 0; }

    std::size_t column(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end())
            throw InputError(source_ + ": missing column '" + std::string(name) + "'");
        return it->second;
    }

    std::size_t size() const { return rows_.size(); }
    const std::string& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }
    double number(std::size_t row, std::size_t col) const {
        return parse_double(rows_[row][col], columns_[col]);
    }
    std::int64_t integer(std::size_t row, std::size_t col) const {
        return parse_int(rows_[row][col], columns_[col]);
    }
    const std::vector<std::string>& columns() const { return columns_; }

private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::string source_;
    std::vector<std::string> columns_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace deltabench::csv
