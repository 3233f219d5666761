#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "trajanon/model.hpp"

namespace trajanon {

/// A raw input dataset: one trajectory per user plus optional origin
/// metadata (ISO-8601 wall-clock anchor of slot 0).
struct Dataset {
    std::map<UserId, Trajectory> trajectories;
    std::optional<std::string> origin_iso;

    std::size_t user_count() const { return trajectories.size(); }

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& [_, tr] : trajectories) n += tr.size();
        return n;
    }

    Coord max_t() const {
        Coord m = 0;
        for (const auto& [_, tr] : trajectories)
            if (!tr.empty()) m = std::max(m, tr.samples().back().t);
        return m;
    }
};

/// Samples of one trajectory with t in [lo, hi). Trajectory order is
/// t-major, so a binary search bounds the copy.
inline std::vector<Sample> samples_between(const Trajectory& tr, Coord lo, Coord hi) {
    const auto& v = tr.samples();
    auto first = std::lower_bound(v.begin(), v.end(), lo,
                                  [](const Sample& s, Coord t) { return s.t < t; });
    auto last = std::lower_bound(first, v.end(), hi,
                                 [](const Sample& s, Coord t) { return s.t < t; });
    return {first, last};
}

inline Dataset make_dataset(std::vector<Sample> samples,
                            std::optional<std::string> origin = std::nullopt) {
    std::map<UserId, std::vector<Sample>> grouped;
    for (auto& s : samples) grouped[s.user].push_back(std::move(s));
    Dataset d;
    d.origin_iso = std::move(origin);
    for (auto& [user, v] : grouped) d.trajectories.emplace(user, Trajectory(user, std::move(v)));
    return d;
}

/// Published cell as released: a closed axis-aligned box, no member list.
struct AnonBox {
    Coord t_min = 0, t_max = 0;
    Coord x_min = 0, x_max = 0;
    Coord y_min = 0, y_max = 0;

    friend bool operator==(const AnonBox&, const AnonBox&) = default;

    bool contains(const Sample& s) const {
        return t_min <= s.t && s.t <= t_max && x_min <= s.x && s.x <= x_max &&
               y_min <= s.y && s.y <= y_max;
    }

    Coord span_t() const { return t_max - t_min + 1; }
    Coord span_x() const { return x_max - x_min + 1; }
    Coord span_y() const { return y_max - y_min + 1; }
};

inline AnonBox box_of(const Bounds& b) {
    return {b.t_min, b.t_max, b.x_min, b.x_max, b.y_min, b.y_max};
}

/// Anonymization parameters echoed into the published file so a verifier can
/// cross-check what it is auditing.
struct AnonMeta {
    std::optional<std::int64_t> k;
    std::optional<Coord> tau;
    std::optional<Coord> epsilon;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> origin_iso;
};

/// A published dataset as read back from disk: per-user time-coherent box
/// sequences plus metadata. Membership information is deliberately absent.
struct PublishedDataset {
    std::map<UserId, std::vector<AnonBox>> records;
    AnonMeta meta;
};

using SuppressionLog = std::set<std::pair<UserId, std::int64_t>>;

namespace detail {

inline std::runtime_error csv_error(const std::string& path, std::size_t line,
                                    const std::string& msg) {
    return std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::int64_t parse_int(const std::string& field, const std::string& path,
                              std::size_t line) {
    std::int64_t value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        throw csv_error(path, line, "non-integer field '" + field + "'");
    return value;
}

inline std::int64_t parse_non_negative(const std::string& field, const std::string& path,
                                       std::size_t line) {
    const std::int64_t v = parse_int(field, path, line);
    if (v < 0) throw csv_error(path, line, "negative coordinate '" + field + "'");
    return v;
}

// Comment lines of the form "# key=value" ahead of the header carry
// metadata; unknown keys are ignored.
inline void parse_meta_line(const std::string& line, AnonMeta& meta) {
    std::string body = line.substr(1);
    while (!body.empty() && body.front() == ' ') body.erase(body.begin());
    const auto eq = body.find('=');
    if (eq == std::string::npos) return;
    const std::string key = body.substr(0, eq);
    const std::string value = body.substr(eq + 1);
    auto as_int = [&]() -> std::optional<std::int64_t> {
        std::int64_t v = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || ptr != value.data() + value.size()) return std::nullopt;
        return v;
    };
    if (key == "origin") {
        meta.origin_iso = value;
    } else if (key == "k") {
        meta.k = as_int();
    } else if (key == "tau") {
        meta.tau = as_int();
    } else if (key == "epsilon") {
        meta.epsilon = as_int();
    } else if (key == "seed") {
        if (auto v = as_int()) meta.seed = static_cast<std::uint64_t>(*v);
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

} // namespace detail

inline constexpr const char* kRawHeader = "user_id,t,x,y";
inline constexpr const char* kAnonHeader = "user_id,t_min,t_max,x_min,x_max,y_min,y_max";
inline constexpr const char* kSuppressionHeader = "user_id,epoch";

inline void write_raw_csv(const std::string& path, const Dataset& d) {
    auto out = detail::open_out(path);
    if (d.origin_iso) out << "# origin=" << *d.origin_iso << "\n";
    out << kRawHeader << "\n";
    for (const auto& [user, tr] : d.trajectories)
        for (const Sample& s : tr.samples())
            out << user << ',' << s.t << ',' << s.x << ',' << s.y << "\n";
}

inline Dataset read_raw_csv(const std::string& path) {
    auto in = detail::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    AnonMeta meta;
    bool header_seen = false;
    std::vector<Sample> samples;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            detail::parse_meta_line(line, meta);
            continue;
        }
        if (!header_seen) {
            if (line != kRawHeader)
                throw detail::csv_error(path, lineno,
                                        std::string("missing header, expected '") + kRawHeader +
                                            "'");
            header_seen = true;
            continue;
        }
        auto f = detail::split_fields(line);
        if (f.size() != 4) throw detail::csv_error(path, lineno, "expected 4 fields");
        if (f[0].empty()) throw detail::csv_error(path, lineno, "empty user id");
        Sample s{f[0], detail::parse_non_negative(f[1], path, lineno),
                 detail::parse_non_negative(f[2], path, lineno),
                 detail::parse_non_negative(f[3], path, lineno)};
        samples.push_back(std::move(s));
    }
    if (!header_seen) throw detail::csv_error(path, lineno, "missing header");
    return make_dataset(std::move(samples), meta.origin_iso);
}

inline void write_anon_csv(const std::string& path, const PublishedDataset& d) {
    auto out = detail::open_out(path);
    if (d.meta.k) out << "# k=" << *d.meta.k << "\n";
    if (d.meta.tau) out << "# tau=" << *d.meta.tau << "\n";
    if (d.meta.epsilon) out << "# epsilon=" << *d.meta.epsilon << "\n";
    if (d.meta.seed) out << "# seed=" << *d.meta.seed << "\n";
    if (d.meta.origin_iso) out << "# origin=" << *d.meta.origin_iso << "\n";
    out << kAnonHeader << "\n";
    for (const auto& [user, cells] : d.records)
        for (const AnonBox& b : cells)
            out << user << ',' << b.t_min << ',' << b.t_max << ',' << b.x_min << ',' << b.x_max
                << ',' << b.y_min << ',' << b.y_max << "\n";
}

inline PublishedDataset read_anon_csv(const std::string& path) {
    auto in = detail::open_in(path);
    PublishedDataset d;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            detail::parse_meta_line(line, d.meta);
            continue;
        }
        if (!header_seen) {
            if (line != kAnonHeader)
                throw detail::csv_error(path, lineno,
                                        std::string("missing header, expected '") + kAnonHeader +
                                            "'");
            header_seen = true;
            continue;
        }
        auto f = detail::split_fields(line);
        if (f.size() != 7) throw detail::csv_error(path, lineno, "expected 7 fields");
        if (f[0].empty()) throw detail::csv_error(path, lineno, "empty user id");
        AnonBox b{detail::parse_non_negative(f[1], path, lineno),
                  detail::parse_non_negative(f[2], path, lineno),
                  detail::parse_non_negative(f[3], path, lineno),
                  detail::parse_non_negative(f[4], path, lineno),
                  detail::parse_non_negative(f[5], path, lineno),
                  detail::parse_non_negative(f[6], path, lineno)};
        if (b.t_min > b.t_max || b.x_min > b.x_max || b.y_min > b.y_max)
            throw detail::csv_error(path, lineno, "inverted span");
        d.records[f[0]].push_back(b);
    }
    if (!header_seen) throw detail::csv_error(path, lineno, "missing header");
    for (auto& [user, cells] : d.records) {
        std::sort(cells.begin(), cells.end(),
                  [](const AnonBox& a, const AnonBox& b) { return a.t_min < b.t_min; });
        for (std::size_t i = 1; i < cells.size(); ++i)
            if (cells[i - 1].t_max >= cells[i].t_min)
                throw std::runtime_error(path + ": record of " + user +
                                         " is not time-coherent");
    }
    return d;
}

inline void write_suppression_csv(const std::string& path, const SuppressionLog& log) {
    auto out = detail::open_out(path);
    out << kSuppressionHeader << "\n";
    for (const auto& [user, epoch] : log) out << user << ',' << epoch << "\n";
}

inline SuppressionLog read_suppression_csv(const std::string& path) {
    auto in = detail::open_in(path);
    SuppressionLog log;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') continue;
        if (!header_seen) {
            if (line != kSuppressionHeader)
                throw detail::csv_error(path, lineno,
                                        std::string("missing header, expected '") +
                                            kSuppressionHeader + "'");
            header_seen = true;
            continue;
        }
        auto f = detail::split_fields(line);
        if (f.size() != 2) throw detail::csv_error(path, lineno, "expected 2 fields");
        if (f[0].empty()) throw detail::csv_error(path, lineno, "empty user id");
        const std::int64_t epoch = detail::parse_int(f[1], path, lineno);
        if (epoch < 1) throw detail::csv_error(path, lineno, "epoch must be >= 1");
        log.emplace(f[0], epoch);
    }
    if (!header_seen) throw detail::csv_error(path, lineno, "missing header");
    return log;
}

} // namespace trajanon
