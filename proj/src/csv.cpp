#include "divrec/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "divrec/error.hpp"

namespace divrec {

CsvReader::CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw InputError("cannot open file: " + path);
}

bool CsvReader::next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        fields = split_csv_line(line);
        return true;
    }
    return false;
}

void CsvReader::expect_header(const std::vector<std::string>& columns) {
    std::vector<std::string> fields;
    if (!next(fields)) throw InputError(path_ + ": empty file, expected header");
    if (fields != columns) {
        std::string want;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) want += ',';
            want += columns[i];
        }
        throw InputError(path_ + ":1: bad header, expected `" + want + "`");
    }
}

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw InputError("cannot open file for writing: " + path);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void CsvWriter::close() {
    out_.flush();
    if (!out_) throw InputError("write failed: " + path_);
    out_.close();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::optional<std::int64_t> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return v;
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string fmt_int(std::int64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian civil date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool all_digits(const std::string& s, std::size_t begin, std::size_t count) {
    if (begin + count > s.size()) return false;
    for (std::size_t i = begin; i < begin + count; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

int to_num(const std::string& s, std::size_t begin, std::size_t count) {
    int v = 0;
    for (std::size_t i = begin; i < begin + count; ++i) v = v * 10 + (s[i] - '0');
    return v;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601_utc(const std::string& s) {
    // Date part.
    if (!all_digits(s, 0, 4) || s.size() < 10 || s[4] != '-' || s[7] != '-' ||
        !all_digits(s, 5, 2) || !all_digits(s, 8, 2)) {
        return std::nullopt;
    }
    const int year = to_num(s, 0, 4);
    const int month = to_num(s, 5, 2);
    const int day = to_num(s, 8, 2);
    if (month < 1 || month > 12 || day < 1 || day > 31) return std::nullopt;

    int hh = 0, mm = 0, ss = 0;
    if (s.size() > 10) {
        if ((s[10] != 'T' && s[10] != ' ') || s.size() < 19 || s[13] != ':' || s[16] != ':' ||
            !all_digits(s, 11, 2) || !all_digits(s, 14, 2) || !all_digits(s, 17, 2)) {
            return std::nullopt;
        }
        hh = to_num(s, 11, 2);
        mm = to_num(s, 14, 2);
        ss = to_num(s, 17, 2);
        if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
        if (s.size() == 20) {
            if (s[19] != 'Z') return std::nullopt;
        } else if (s.size() != 19) {
            return std::nullopt;
        }
    } else if (s.size() != 10) {
        return std::nullopt;
    }
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) *
               86400 +
           hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601_utc(std::int64_t seconds) {
    std::int64_t days = seconds / 86400;
    std::int64_t rem = seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    // Inverse of days_from_civil.
    std::int64_t z = days + 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    const std::int64_t year = y + (m <= 2);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(year), m, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace divrec
