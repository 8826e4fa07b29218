#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "divrec/ingest.hpp"

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("divrec_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }
    std::string dir() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline std::string write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    return path;
}

// Hand-built ratings matrix for unit tests. Cells must be passed in any
// order; they are sorted per user.
struct CellSpec {
    std::uint32_t user;
    std::uint32_t domain;
    double rating;
    bool train;
    std::int64_t pageviews = 1;
};

inline divrec::RatingsMatrix make_matrix(std::size_t n_users, std::size_t n_domains,
                                         const std::vector<CellSpec>& cells) {
    divrec::RatingsMatrix m;
    for (std::size_t u = 0; u < n_users; ++u) {
        m.user_ids.push_back("u" + std::to_string(100 + u));
        m.partisanship.push_back(static_cast<int>(u % 7) + 1);
    }
    for (std::size_t d = 0; d < n_domains; ++d) {
        m.domains.push_back("d" + std::to_string(100 + d) + ".example");
    }
    m.train.resize(n_users);
    m.test.resize(n_users);
    for (const auto& c : cells) {
        auto& side = c.train ? m.train[c.user] : m.test[c.user];
        side.push_back({c.domain, c.rating, c.pageviews});
    }
    auto by_domain = [](const divrec::RatedCell& a, const divrec::RatedCell& b) {
        return a.domain < b.domain;
    };
    for (auto& v : m.train) std::sort(v.begin(), v.end(), by_domain);
    for (auto& v : m.test) std::sort(v.begin(), v.end(), by_domain);
    return m;
}

}  // namespace testsupport
