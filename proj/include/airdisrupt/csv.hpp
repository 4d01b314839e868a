#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "airdisrupt/errors.hpp"

namespace airdisrupt::csv {

// Minimal comma-separated reader/writer. The file formats in this project
// never contain quoted or embedded commas, so no quoting layer is needed.

struct Row {
    size_t line_no = 0;  // 1-based, header is line 1
    std::vector<std::string> fields;
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw DataError("cannot open file: " + path);
    }

    // Reads the header line and checks it against the expected column list.
    std::vector<std::string> read_header(const std::vector<std::string>& expected) {
        std::string line;
        if (!std::getline(in_, line)) {
            throw DataError(path_ + ": missing header line");
        }
        ++line_no_;
        auto cols = split_line(line);
        if (!expected.empty() && cols != expected) {
            std::string want;
            for (const auto& c : expected) {
                if (!want.empty()) want += ',';
                want += c;
            }
            throw DataError(path_ + ": unexpected header \"" + line +
                            "\" (expected \"" + want + "\")");
        }
        return cols;
    }

    bool next(Row& row) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line.empty() || line == "\r") continue;
            row.line_no = line_no_;
            row.fields = split_line(line);
            return true;
        }
        return false;
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ifstream in_;
    size_t line_no_ = 0;
};

// Shortest round-trip decimal form; deterministic across runs and threads.
inline std::string format_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw DataError("cannot open file for writing: " + path);
    }

    void raw_line(const std::string& line) { out_ << line << '\n'; }

    Writer& field(std::string_view s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    Writer& field(double v) { return field(format_double(v)); }
    Writer& field(int64_t v) { return field(std::to_string(v)); }
    Writer& field(int v) { return field(std::to_string(v)); }
    Writer& field(size_t v) { return field(std::to_string(v)); }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    std::ofstream out_;
    bool first_ = true;
};

inline double parse_double(const std::string& s, const std::string& context) {
    double v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw DataError(context + ": not a number: \"" + s + "\"");
    }
    return v;
}

inline int64_t parse_int(const std::string& s, const std::string& context) {
    int64_t v = 0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw DataError(context + ": not an integer: \"" + s + "\"");
    }
    return v;
}

}  // namespace airdisrupt::csv
