#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chartfolio/error.hpp"

namespace chartfolio {

// Minimal comma-separated handling: no quoting, no embedded commas. Every
// file format in this project is plain tickers, dates and numbers.
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.emplace_back(line.substr(start));
            break;
        }
        fields.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

inline std::string join_csv(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

// %.17g guarantees double -> text -> double round-trips exactly.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::optional<double> parse_double(std::string_view s) {
    // Trim spaces and a trailing CR left by Windows line endings.
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

// Line-oriented CSV reader. Comment lines starting with '#' are surfaced
// separately so artifact provenance headers do not interfere with data rows.
class CsvReader {
  public:
    explicit CsvReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw missing_artifact_error("cannot open file: " + path);
    }

    const std::string& path() const { return path_; }
    size_t line_number() const { return line_no_; }
    const std::vector<std::string>& comments() const { return comments_; }

    // Next non-comment, non-empty line split into fields; nullopt at EOF.
    std::optional<std::vector<std::string>> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            line = strip_cr(std::move(line));
            if (line.empty()) continue;
            if (line[0] == '#') {
                comments_.push_back(line);
                continue;
            }
            return split_csv_line(line);
        }
        return std::nullopt;
    }

  private:
    std::string path_;
    std::ifstream in_;
    size_t line_no_ = 0;
    std::vector<std::string> comments_;
};

// Extracts `value` from a stored comment line of the form `# key=value`.
inline std::optional<std::string> comment_value(const std::string& comment,
                                                const std::string& key) {
    size_t pos = 0;
    while (pos < comment.size() && (comment[pos] == '#' || comment[pos] == ' ')) ++pos;
    const std::string tag = key + "=";
    if (comment.compare(pos, tag.size(), tag) != 0) return std::nullopt;
    return comment.substr(pos + tag.size());
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw data_error("cannot open file for writing: " + path);
    }

    void comment(const std::string& text) { out_ << "# " << text << "\n"; }
    void line(const std::string& raw) { out_ << raw << "\n"; }
    void row(const std::vector<std::string>& fields) { out_ << join_csv(fields) << "\n"; }

    void close() {
        out_.close();
        if (!out_) throw data_error("write failed: " + path_);
    }

  private:
    std::string path_;
    std::ofstream out_;
};

} // namespace chartfolio
