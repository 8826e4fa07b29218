#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace divrec {

struct TrafficRecord {
    std::string user_id;
    std::string domain;  // normalized: lowercase, no scheme/path, no "www."
    std::optional<std::int64_t> timestamp;  // UTC seconds
    std::int64_t pageviews = 0;
};

struct SurveyRecord {
    std::string user_id;
    int partisanship = 0;  // 1 = strong Democrat .. 7 = strong Republican
};

enum class ScoreCategory { Green, Red, Satire, Platform };

const char* category_name(ScoreCategory c);
std::optional<ScoreCategory> category_from_name(const std::string& name);

struct ScoreRecord {
    std::string domain;
    double score = 0.0;  // 0..100
    ScoreCategory category = ScoreCategory::Green;
};

struct PanelUser {
    std::string id;
    int partisanship = 0;
};

struct PanelCell {
    std::uint32_t user = 0;
    std::uint32_t domain = 0;
    std::int64_t pageviews = 0;
};

struct PanelEvent {
    std::uint32_t user = 0;
    std::uint32_t domain = 0;
    std::int64_t timestamp = 0;
    std::int64_t pageviews = 0;
};

// Pooled multi-wave panel after domain filtering. Immutable once built.
struct PanelDataset {
    std::vector<PanelUser> users;      // sorted by id
    std::vector<std::string> domains;  // sorted
    std::vector<PanelCell> cells;      // sorted by (user, domain); pooled pageviews
    std::vector<std::uint32_t> user_cell_begin;  // size users+1, offsets into cells

    // Raw timestamped rows, kept only when every traffic row carried a
    // timestamp; required for the longitudinal split.
    std::vector<PanelEvent> events;
    bool has_timestamps = false;

    std::unordered_map<std::string, ScoreRecord> scores;  // by domain, partial
    std::unordered_map<std::string, double> slants;       // by domain, partial

    int min_visitors = 30;
    std::size_t dropped_users_missing_survey = 0;
    std::int64_t total_pageviews = 0;

    std::optional<std::uint32_t> user_index(const std::string& id) const;
    std::optional<std::uint32_t> domain_index(const std::string& d) const;
    const ScoreRecord* score_for(std::uint32_t domain) const;
    std::optional<double> slant_for(std::uint32_t domain) const;
};

enum class SplitMode { Random, Longitudinal };

struct RatedCell {
    std::uint32_t domain = 0;
    double rating = 0.0;
    std::int64_t pageviews = 0;
};

// Sparse user x domain TF-IDF ratings with a train/test partition. In the
// random split every visited (user, domain) cell lands on exactly one side;
// in the longitudinal split the same domain may hold a cell on both sides,
// carrying that side's pageviews and ratings.
struct RatingsMatrix {
    std::vector<std::string> user_ids;  // aligned with panel users
    std::vector<int> partisanship;
    std::vector<std::string> domains;

    std::vector<std::vector<RatedCell>> train;  // per user, sorted by domain
    std::vector<std::vector<RatedCell>> test;

    SplitMode mode = SplitMode::Random;
    double train_fraction = 1.0;
    std::uint64_t seed = 0;
    std::optional<std::int64_t> boundary;

    std::size_t n_users() const { return user_ids.size(); }
    std::size_t n_domains() const { return domains.size(); }

    const RatedCell* train_cell(std::uint32_t user, std::uint32_t domain) const;
    const RatedCell* test_cell(std::uint32_t user, std::uint32_t domain) const;

    // Domains with at least one training cell, ascending.
    std::vector<std::uint32_t> train_universe() const;
    // Distinct training visitors per domain (global popularity input).
    std::vector<std::int64_t> train_visitor_counts() const;
};

std::string normalize_domain(const std::string& raw);

std::vector<TrafficRecord> load_traffic_file(const std::string& path);
std::vector<SurveyRecord> load_survey_file(const std::string& path);
std::vector<ScoreRecord> load_scores_file(const std::string& path);
std::unordered_map<std::string, double> load_slants_file(const std::string& path);

PanelDataset load_panel(const std::vector<std::string>& traffic_paths,
                        const std::string& survey_path, const std::string& scores_path,
                        const std::optional<std::string>& slants_path, int min_visitors = 30);

// Panel assembly from in-memory records (shared by load_panel and tests).
PanelDataset build_panel(const std::vector<TrafficRecord>& traffic,
                         const std::vector<SurveyRecord>& survey,
                         const std::vector<ScoreRecord>& scores,
                         const std::unordered_map<std::string, double>& slants,
                         int min_visitors);

// TF-IDF ratings over the whole panel; every cell tagged train.
RatingsMatrix build_ratings(const PanelDataset& panel);

struct SplitOptions {
    SplitMode mode = SplitMode::Random;
    double train_fraction = 0.7;
    std::uint64_t seed = 0;
    std::optional<std::int64_t> boundary;
};

RatingsMatrix split(const PanelDataset& panel, const SplitOptions& options);

// External interface: single JSON manifest plus a ratings triplet CSV.
void write_panel_json(const PanelDataset& panel, const std::string& path);
PanelDataset read_panel_json(const std::string& path);
void write_ratings_csv(const RatingsMatrix& matrix, const std::string& path);
RatingsMatrix read_ratings_csv(const std::string& path);

}  // namespace divrec
