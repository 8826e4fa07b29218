#include "divrec/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "divrec/csv.hpp"
#include "divrec/error.hpp"
#include "divrec/rng.hpp"

namespace divrec {

namespace {

[[noreturn]] void row_error(const CsvReader& reader, const std::string& what) {
    throw InputError(reader.path() + ":" + std::to_string(reader.line_number()) + ": " + what);
}

}  // namespace

const char* category_name(ScoreCategory c) {
    switch (c) {
        case ScoreCategory::Green: return "green";
        case ScoreCategory::Red: return "red";
        case ScoreCategory::Satire: return "satire";
        case ScoreCategory::Platform: return "platform";
    }
    return "green";
}

std::optional<ScoreCategory> category_from_name(const std::string& name) {
    const std::string n = lowercase(name);
    if (n == "green") return ScoreCategory::Green;
    if (n == "red") return ScoreCategory::Red;
    if (n == "satire") return ScoreCategory::Satire;
    if (n == "platform") return ScoreCategory::Platform;
    return std::nullopt;
}

std::string normalize_domain(const std::string& raw) {
    std::string s = raw;
    // Trim surrounding spaces, drop scheme and anything after the hostname.
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    if (auto pos = s.find("://"); pos != std::string::npos) s = s.substr(pos + 3);
    if (auto pos = s.find('/'); pos != std::string::npos) s = s.substr(0, pos);
    if (auto pos = s.find(':'); pos != std::string::npos) s = s.substr(0, pos);
    s = lowercase(s);
    if (s.rfind("www.", 0) == 0) s = s.substr(4);
    for (char c : s) {
        if (c == ' ' || c == '\t') return "";
    }
    return s;
}

std::vector<TrafficRecord> load_traffic_file(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header({"user_id", "domain", "timestamp", "pageviews"});
    std::vector<TrafficRecord> records;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 4) row_error(reader, "expected 4 fields");
        TrafficRecord rec;
        rec.user_id = f[0];
        if (rec.user_id.empty()) row_error(reader, "empty user_id");
        rec.domain = normalize_domain(f[1]);
        if (rec.domain.empty()) row_error(reader, "invalid domain `" + f[1] + "`");
        if (!f[2].empty()) {
            auto ts = parse_iso8601_utc(f[2]);
            if (!ts) row_error(reader, "invalid timestamp `" + f[2] + "`");
            rec.timestamp = *ts;
        }
        auto pv = parse_int(f[3]);
        if (!pv || *pv < 1) row_error(reader, "pageviews must be a positive integer");
        rec.pageviews = *pv;
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<SurveyRecord> load_survey_file(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header({"user_id", "partisanship"});
    std::vector<SurveyRecord> records;
    std::unordered_map<std::string, int> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 2) row_error(reader, "expected 2 fields");
        if (f[0].empty()) row_error(reader, "empty user_id");
        auto p = parse_int(f[1]);
        if (!p || *p < 1 || *p > 7) row_error(reader, "partisanship must be in 1..7");
        auto [it, inserted] = seen.emplace(f[0], static_cast<int>(*p));
        if (!inserted) {
            if (it->second != *p) {
                row_error(reader, "user `" + f[0] + "` repeated with conflicting partisanship");
            }
            continue;  // benign duplicate
        }
        records.push_back({f[0], static_cast<int>(*p)});
    }
    return records;
}

std::vector<ScoreRecord> load_scores_file(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header({"domain", "score", "category"});
    std::vector<ScoreRecord> records;
    std::unordered_set<std::string> seen;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 3) row_error(reader, "expected 3 fields");
        ScoreRecord rec;
        rec.domain = normalize_domain(f[0]);
        if (rec.domain.empty()) row_error(reader, "invalid domain `" + f[0] + "`");
        auto score = parse_double(f[1]);
        if (!score || *score < 0.0 || *score > 100.0) {
            row_error(reader, "score must be in [0,100]");
        }
        rec.score = *score;
        auto cat = category_from_name(f[2]);
        if (!cat) row_error(reader, "unknown category `" + f[2] + "`");
        rec.category = *cat;
        if (rec.category == ScoreCategory::Green && rec.score < 60.0) {
            row_error(reader, "green domain `" + rec.domain + "` has score < 60");
        }
        if (rec.category == ScoreCategory::Red && rec.score >= 60.0) {
            row_error(reader, "red domain `" + rec.domain + "` has score >= 60");
        }
        if (!seen.insert(rec.domain).second) {
            row_error(reader, "duplicate score row for domain `" + rec.domain + "`");
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::unordered_map<std::string, double> load_slants_file(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header({"domain", "slant"});
    std::unordered_map<std::string, double> slants;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 2) row_error(reader, "expected 2 fields");
        const std::string domain = normalize_domain(f[0]);
        if (domain.empty()) row_error(reader, "invalid domain `" + f[0] + "`");
        auto slant = parse_double(f[1]);
        if (!slant || *slant < -2.0 || *slant > 2.0) {
            row_error(reader, "slant must be in [-2,2]");
        }
        if (!slants.emplace(domain, *slant).second) {
            row_error(reader, "duplicate slant row for domain `" + domain + "`");
        }
    }
    return slants;
}

std::optional<std::uint32_t> PanelDataset::user_index(const std::string& id) const {
    auto it = std::lower_bound(users.begin(), users.end(), id,
                               [](const PanelUser& u, const std::string& v) { return u.id < v; });
    if (it == users.end() || it->id != id) return std::nullopt;
    return static_cast<std::uint32_t>(it - users.begin());
}

std::optional<std::uint32_t> PanelDataset::domain_index(const std::string& d) const {
    auto it = std::lower_bound(domains.begin(), domains.end(), d);
    if (it == domains.end() || *it != d) return std::nullopt;
    return static_cast<std::uint32_t>(it - domains.begin());
}

const ScoreRecord* PanelDataset::score_for(std::uint32_t domain) const {
    auto it = scores.find(domains[domain]);
    return it == scores.end() ? nullptr : &it->second;
}

std::optional<double> PanelDataset::slant_for(std::uint32_t domain) const {
    auto it = slants.find(domains[domain]);
    if (it == slants.end()) return std::nullopt;
    return it->second;
}

PanelDataset build_panel(const std::vector<TrafficRecord>& traffic,
                         const std::vector<SurveyRecord>& survey,
                         const std::vector<ScoreRecord>& scores,
                         const std::unordered_map<std::string, double>& slants,
                         int min_visitors) {
    if (min_visitors < 1) throw InputError("min_visitors must be >= 1");

    std::unordered_map<std::string, int> partisanship_by_user;
    for (const auto& rec : survey) {
        auto [it, inserted] = partisanship_by_user.emplace(rec.user_id, rec.partisanship);
        if (!inserted && it->second != rec.partisanship) {
            throw InputError("user `" + rec.user_id + "` has conflicting partisanship values");
        }
    }

    // Pool waves: sum pageviews per (user, domain); drop users without survey.
    std::map<std::pair<std::string, std::string>, std::int64_t> pooled;
    std::unordered_set<std::string> dropped_users;
    bool all_timestamped = !traffic.empty();
    for (const auto& rec : traffic) {
        if (!partisanship_by_user.count(rec.user_id)) {
            dropped_users.insert(rec.user_id);
            continue;
        }
        pooled[{rec.user_id, rec.domain}] += rec.pageviews;
        if (!rec.timestamp) all_timestamped = false;
    }

    // Distinct-visitor filter.
    std::unordered_map<std::string, std::int64_t> visitors_per_domain;
    for (const auto& [key, pv] : pooled) visitors_per_domain[key.second] += 1;
    std::set<std::string> kept_domains;
    for (const auto& [domain, n] : visitors_per_domain) {
        if (n >= min_visitors) kept_domains.insert(domain);
    }

    std::set<std::string> kept_users;
    for (const auto& [key, pv] : pooled) {
        if (kept_domains.count(key.second)) kept_users.insert(key.first);
    }

    PanelDataset panel;
    panel.min_visitors = min_visitors;
    panel.dropped_users_missing_survey = dropped_users.size();
    panel.users.reserve(kept_users.size());
    for (const auto& id : kept_users) {
        panel.users.push_back({id, partisanship_by_user.at(id)});
    }
    panel.domains.assign(kept_domains.begin(), kept_domains.end());

    std::unordered_map<std::string, std::uint32_t> user_idx;
    std::unordered_map<std::string, std::uint32_t> domain_idx;
    for (std::uint32_t i = 0; i < panel.users.size(); ++i) user_idx[panel.users[i].id] = i;
    for (std::uint32_t i = 0; i < panel.domains.size(); ++i) domain_idx[panel.domains[i]] = i;

    for (const auto& [key, pv] : pooled) {
        auto d = domain_idx.find(key.second);
        if (d == domain_idx.end()) continue;
        panel.cells.push_back({user_idx.at(key.first), d->second, pv});
        panel.total_pageviews += pv;
    }
    std::sort(panel.cells.begin(), panel.cells.end(), [](const PanelCell& a, const PanelCell& b) {
        return a.user != b.user ? a.user < b.user : a.domain < b.domain;
    });
    panel.user_cell_begin.assign(panel.users.size() + 1, 0);
    for (const auto& c : panel.cells) panel.user_cell_begin[c.user + 1] += 1;
    for (std::size_t u = 0; u < panel.users.size(); ++u) {
        panel.user_cell_begin[u + 1] += panel.user_cell_begin[u];
    }

    panel.has_timestamps = all_timestamped;
    if (all_timestamped) {
        for (const auto& rec : traffic) {
            auto u = user_idx.find(rec.user_id);
            auto d = domain_idx.find(rec.domain);
            if (u == user_idx.end() || d == domain_idx.end()) continue;
            panel.events.push_back({u->second, d->second, *rec.timestamp, rec.pageviews});
        }
        std::sort(panel.events.begin(), panel.events.end(),
                  [](const PanelEvent& a, const PanelEvent& b) {
                      if (a.user != b.user) return a.user < b.user;
                      if (a.domain != b.domain) return a.domain < b.domain;
                      return a.timestamp < b.timestamp;
                  });
    }

    for (const auto& rec : scores) panel.scores[rec.domain] = rec;
    panel.slants = slants;
    return panel;
}

PanelDataset load_panel(const std::vector<std::string>& traffic_paths,
                        const std::string& survey_path, const std::string& scores_path,
                        const std::optional<std::string>& slants_path, int min_visitors) {
    if (traffic_paths.empty()) throw InputError("at least one traffic file is required");
    std::vector<TrafficRecord> traffic;
    for (const auto& path : traffic_paths) {
        auto wave = load_traffic_file(path);
        traffic.insert(traffic.end(), std::make_move_iterator(wave.begin()),
                       std::make_move_iterator(wave.end()));
    }
    auto survey = load_survey_file(survey_path);
    auto scores = load_scores_file(scores_path);
    std::unordered_map<std::string, double> slants;
    if (slants_path) slants = load_slants_file(*slants_path);
    return build_panel(traffic, survey, scores, slants, min_visitors);
}

namespace {

struct TfIdfStats {
    std::vector<double> user_sum;    // per user
    std::vector<double> domain_sum;  // per domain
    double total = 0.0;
};

// rating = (pv / user_sum) * ln(total / domain_sum)
double tfidf(const TfIdfStats& s, std::uint32_t user, std::uint32_t domain, std::int64_t pv) {
    return (static_cast<double>(pv) / s.user_sum[user]) *
           std::log(s.total / s.domain_sum[domain]);
}

RatingsMatrix matrix_shell(const PanelDataset& panel) {
    RatingsMatrix m;
    m.user_ids.reserve(panel.users.size());
    m.partisanship.reserve(panel.users.size());
    for (const auto& u : panel.users) {
        m.user_ids.push_back(u.id);
        m.partisanship.push_back(u.partisanship);
    }
    m.domains = panel.domains;
    m.train.resize(panel.users.size());
    m.test.resize(panel.users.size());
    return m;
}

}  // namespace

RatingsMatrix build_ratings(const PanelDataset& panel) {
    if (panel.users.empty() || panel.cells.empty() || panel.total_pageviews < 1) {
        throw InputError("panel has no traffic; cannot build ratings");
    }
    TfIdfStats stats;
    stats.user_sum.assign(panel.users.size(), 0.0);
    stats.domain_sum.assign(panel.domains.size(), 0.0);
    for (const auto& c : panel.cells) {
        stats.user_sum[c.user] += static_cast<double>(c.pageviews);
        stats.domain_sum[c.domain] += static_cast<double>(c.pageviews);
        stats.total += static_cast<double>(c.pageviews);
    }
    RatingsMatrix m = matrix_shell(panel);
    m.mode = SplitMode::Random;
    m.train_fraction = 1.0;
    for (const auto& c : panel.cells) {
        m.train[c.user].push_back({c.domain, tfidf(stats, c.user, c.domain, c.pageviews),
                                   c.pageviews});
    }
    return m;
}

RatingsMatrix split(const PanelDataset& panel, const SplitOptions& options) {
    if (options.mode == SplitMode::Random) {
        if (options.train_fraction <= 0.0 || options.train_fraction >= 1.0) {
            throw InputError("train_fraction must be in (0,1)");
        }
        RatingsMatrix m = build_ratings(panel);
        m.mode = SplitMode::Random;
        m.train_fraction = options.train_fraction;
        m.seed = options.seed;
        for (std::size_t u = 0; u < m.n_users(); ++u) {
            Rng rng(Rng::hash_str(options.seed, m.user_ids[u]));
            auto& train = m.train[u];
            auto& test = m.test[u];
            std::vector<RatedCell> kept;
            kept.reserve(train.size());
            for (const auto& cell : train) {
                if (rng.bernoulli(options.train_fraction)) {
                    kept.push_back(cell);
                } else {
                    test.push_back(cell);
                }
            }
            train = std::move(kept);
        }
        bool any_train = false, any_test = false;
        for (std::size_t u = 0; u < m.n_users(); ++u) {
            any_train = any_train || !m.train[u].empty();
            any_test = any_test || !m.test[u].empty();
        }
        if (!any_train || !any_test) {
            throw InputError("split left one side empty for every user");
        }
        return m;
    }

    // Longitudinal: pageviews strictly before the boundary train, the rest test.
    if (!options.boundary) throw InputError("longitudinal split requires a boundary timestamp");
    if (!panel.has_timestamps) {
        throw InputError("longitudinal split requires timestamps on every traffic row");
    }
    const std::int64_t boundary = *options.boundary;

    std::map<std::pair<std::uint32_t, std::uint32_t>, std::int64_t> train_pv, test_pv;
    for (const auto& e : panel.events) {
        auto key = std::make_pair(e.user, e.domain);
        if (e.timestamp < boundary) {
            train_pv[key] += e.pageviews;
        } else {
            test_pv[key] += e.pageviews;
        }
    }

    auto partition_stats = [&](const std::map<std::pair<std::uint32_t, std::uint32_t>,
                                              std::int64_t>& part) {
        TfIdfStats s;
        s.user_sum.assign(panel.users.size(), 0.0);
        s.domain_sum.assign(panel.domains.size(), 0.0);
        for (const auto& [key, pv] : part) {
            s.user_sum[key.first] += static_cast<double>(pv);
            s.domain_sum[key.second] += static_cast<double>(pv);
            s.total += static_cast<double>(pv);
        }
        return s;
    };

    if (train_pv.empty() || test_pv.empty()) {
        throw InputError("longitudinal boundary leaves one side of the split empty");
    }

    RatingsMatrix m = matrix_shell(panel);
    m.mode = SplitMode::Longitudinal;
    m.boundary = boundary;
    m.seed = options.seed;
    m.train_fraction = options.train_fraction;

    // Each partition's ratings use that partition's own TF-IDF statistics.
    const TfIdfStats train_stats = partition_stats(train_pv);
    const TfIdfStats test_stats = partition_stats(test_pv);
    for (const auto& [key, pv] : train_pv) {
        m.train[key.first].push_back(
            {key.second, tfidf(train_stats, key.first, key.second, pv), pv});
    }
    for (const auto& [key, pv] : test_pv) {
        m.test[key.first].push_back(
            {key.second, tfidf(test_stats, key.first, key.second, pv), pv});
    }
    return m;
}

namespace {

const RatedCell* find_cell(const std::vector<RatedCell>& cells, std::uint32_t domain) {
    auto it = std::lower_bound(cells.begin(), cells.end(), domain,
                               [](const RatedCell& c, std::uint32_t d) { return c.domain < d; });
    if (it == cells.end() || it->domain != domain) return nullptr;
    return &*it;
}

}  // namespace

const RatedCell* RatingsMatrix::train_cell(std::uint32_t user, std::uint32_t domain) const {
    return find_cell(train[user], domain);
}

const RatedCell* RatingsMatrix::test_cell(std::uint32_t user, std::uint32_t domain) const {
    return find_cell(test[user], domain);
}

std::vector<std::uint32_t> RatingsMatrix::train_universe() const {
    std::vector<bool> seen(domains.size(), false);
    for (const auto& cells : train) {
        for (const auto& c : cells) seen[c.domain] = true;
    }
    std::vector<std::uint32_t> out;
    for (std::uint32_t d = 0; d < seen.size(); ++d) {
        if (seen[d]) out.push_back(d);
    }
    return out;
}

std::vector<std::int64_t> RatingsMatrix::train_visitor_counts() const {
    std::vector<std::int64_t> counts(domains.size(), 0);
    for (const auto& cells : train) {
        for (const auto& c : cells) counts[c.domain] += 1;
    }
    return counts;
}

void write_panel_json(const PanelDataset& panel, const std::string& path) {
    nlohmann::json j;
    j["min_visitors"] = panel.min_visitors;
    j["dropped_users_missing_survey"] = panel.dropped_users_missing_survey;
    j["total_pageviews"] = panel.total_pageviews;
    auto& users = j["users"] = nlohmann::json::array();
    for (const auto& u : panel.users) users.push_back({u.id, u.partisanship});
    j["domains"] = panel.domains;
    auto& cells = j["pageviews"] = nlohmann::json::array();
    for (const auto& c : panel.cells) cells.push_back({c.user, c.domain, c.pageviews});
    auto& scores = j["scores"] = nlohmann::json::array();
    {
        std::vector<const ScoreRecord*> sorted;
        sorted.reserve(panel.scores.size());
        for (const auto& [d, rec] : panel.scores) sorted.push_back(&rec);
        std::sort(sorted.begin(), sorted.end(),
                  [](const ScoreRecord* a, const ScoreRecord* b) { return a->domain < b->domain; });
        for (const ScoreRecord* rec : sorted) {
            scores.push_back({rec->domain, rec->score, category_name(rec->category)});
        }
    }
    auto& slants = j["slants"] = nlohmann::json::array();
    {
        std::vector<std::pair<std::string, double>> sorted(panel.slants.begin(),
                                                           panel.slants.end());
        std::sort(sorted.begin(), sorted.end());
        for (const auto& [d, s] : sorted) slants.push_back({d, s});
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot open file for writing: " + path);
    out << j.dump(1) << '\n';
    if (!out) throw InputError("write failed: " + path);
}

PanelDataset read_panel_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": invalid JSON: " + e.what());
    }
    try {
        PanelDataset panel;
        panel.min_visitors = j.at("min_visitors").get<int>();
        panel.dropped_users_missing_survey = j.at("dropped_users_missing_survey").get<std::size_t>();
        panel.total_pageviews = j.at("total_pageviews").get<std::int64_t>();
        for (const auto& u : j.at("users")) {
            panel.users.push_back({u.at(0).get<std::string>(), u.at(1).get<int>()});
        }
        panel.domains = j.at("domains").get<std::vector<std::string>>();
        for (const auto& c : j.at("pageviews")) {
            panel.cells.push_back({c.at(0).get<std::uint32_t>(), c.at(1).get<std::uint32_t>(),
                                   c.at(2).get<std::int64_t>()});
        }
        panel.user_cell_begin.assign(panel.users.size() + 1, 0);
        for (const auto& c : panel.cells) panel.user_cell_begin[c.user + 1] += 1;
        for (std::size_t u = 0; u < panel.users.size(); ++u) {
            panel.user_cell_begin[u + 1] += panel.user_cell_begin[u];
        }
        for (const auto& s : j.at("scores")) {
            ScoreRecord rec;
            rec.domain = s.at(0).get<std::string>();
            rec.score = s.at(1).get<double>();
            auto cat = category_from_name(s.at(2).get<std::string>());
            if (!cat) throw InputError(path + ": unknown category in scores");
            rec.category = *cat;
            panel.scores[rec.domain] = rec;
        }
        for (const auto& s : j.at("slants")) {
            panel.slants[s.at(0).get<std::string>()] = s.at(1).get<double>();
        }
        return panel;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": manifest schema mismatch: " + e.what());
    }
}

void write_ratings_csv(const RatingsMatrix& matrix, const std::string& path) {
    CsvWriter w(path);
    w.row({"user_id", "domain", "rating", "split"});
    for (std::size_t u = 0; u < matrix.n_users(); ++u) {
        std::size_t i = 0, t = 0;
        const auto& train = matrix.train[u];
        const auto& test = matrix.test[u];
        // Merge by domain; train row precedes test row for a shared domain.
        while (i < train.size() || t < test.size()) {
            const bool take_train =
                t >= test.size() || (i < train.size() && train[i].domain <= test[t].domain);
            const RatedCell& c = take_train ? train[i] : test[t];
            w.row({matrix.user_ids[u], matrix.domains[c.domain], fmt_double(c.rating),
                   take_train ? "train" : "test"});
            (take_train ? i : t) += 1;
        }
    }
    w.close();
}

RatingsMatrix read_ratings_csv(const std::string& path) {
    CsvReader reader(path);
    reader.expect_header({"user_id", "domain", "rating", "split"});
    struct Row {
        std::string user, domain;
        double rating;
        bool is_train;
    };
    std::vector<Row> rows;
    std::set<std::string> users, domains;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != 4) row_error(reader, "expected 4 fields");
        auto rating = parse_double(f[2]);
        if (!rating) row_error(reader, "invalid rating");
        if (f[3] != "train" && f[3] != "test") row_error(reader, "split must be train|test");
        rows.push_back({f[0], f[1], *rating, f[3] == "train"});
        users.insert(f[0]);
        domains.insert(f[1]);
    }
    RatingsMatrix m;
    m.user_ids.assign(users.begin(), users.end());
    m.partisanship.assign(m.user_ids.size(), 0);
    m.domains.assign(domains.begin(), domains.end());
    m.train.resize(m.user_ids.size());
    m.test.resize(m.user_ids.size());
    std::unordered_map<std::string, std::uint32_t> user_idx, domain_idx;
    for (std::uint32_t i = 0; i < m.user_ids.size(); ++i) user_idx[m.user_ids[i]] = i;
    for (std::uint32_t i = 0; i < m.domains.size(); ++i) domain_idx[m.domains[i]] = i;
    for (const auto& r : rows) {
        auto& side = r.is_train ? m.train[user_idx[r.user]] : m.test[user_idx[r.user]];
        side.push_back({domain_idx[r.domain], r.rating, 0});
    }
    for (auto& cells : m.train) {
        std::sort(cells.begin(), cells.end(),
                  [](const RatedCell& a, const RatedCell& b) { return a.domain < b.domain; });
    }
    for (auto& cells : m.test) {
        std::sort(cells.begin(), cells.end(),
                  [](const RatedCell& a, const RatedCell& b) { return a.domain < b.domain; });
    }
    return m;
}

}  // namespace divrec
