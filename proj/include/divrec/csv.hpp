#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace divrec {

// Line-oriented reader for the plain unquoted CSV files this project consumes.
// Tracks 1-based line numbers for error reporting.
class CsvReader {
public:
    explicit CsvReader(const std::string& path);

    // Reads the next row; false at EOF. Skips fully blank lines.
    bool next(std::vector<std::string>& fields);

    std::size_t line_number() const { return line_; }
    const std::string& path() const { return path_; }

    // Validates that the header matches the expected column names.
    void expect_header(const std::vector<std::string>& columns);

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_ = 0;
};

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    void row(const std::vector<std::string>& fields);
    void close();

private:
    std::ofstream out_;
    std::string path_;
};

std::vector<std::string> split_csv_line(const std::string& line);

// Strict full-field numeric parsing; nullopt on any trailing garbage.
std::optional<double> parse_double(const std::string& s);
std::optional<std::int64_t> parse_int(const std::string& s);

// Deterministic shortest-ish formatting used for every report we emit.
std::string fmt_double(double v);
std::string fmt_int(std::int64_t v);

// "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS[Z]" -> seconds since the Unix epoch, UTC.
std::optional<std::int64_t> parse_iso8601_utc(const std::string& s);
std::string format_iso8601_utc(std::int64_t seconds);

std::string lowercase(std::string s);

}  // namespace divrec
