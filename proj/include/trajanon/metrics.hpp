#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trajanon/data.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

/// Nearest-rank quantile: the value at position ceil(q * n) of the sorted
/// sample (1-based). q in (0, 1].
inline std::int64_t nearest_rank(std::vector<std::int64_t> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of empty sample");
    if (!(q > 0.0) || q > 1.0) throw std::invalid_argument("quantile order out of range");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(
        std::max<std::int64_t>(1, static_cast<std::int64_t>(
                                      std::ceil(q * static_cast<double>(values.size())))));
    if (rank > values.size()) rank = values.size();
    return values[rank - 1];
}

struct SummaryStats {
    double mean = 0.0;
    std::int64_t median = 0;
    std::int64_t q1 = 0;
    std::int64_t q3 = 0;
    std::int64_t min = 0;
    std::int64_t max = 0;
    std::size_t count = 0;
};

inline SummaryStats summarize(const std::vector<std::int64_t>& values) {
    SummaryStats s;
    s.count = values.size();
    if (values.empty()) return s;
    double total = 0.0;
    s.min = values.front();
    s.max = values.front();
    for (auto v : values) {
        total += static_cast<double>(v);
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
    }
    s.mean = total / static_cast<double>(values.size());
    s.median = nearest_rank(values, 0.5);
    s.q1 = nearest_rank(values, 0.25);
    s.q3 = nearest_rank(values, 0.75);
    return s;
}

/// One slot is one minute; one grid step is 100 metres. A published box's
/// temporal granularity is its slot span in minutes and its spatial
/// granularity the sum of its coordinate spans in metres (singletons
/// therefore measure 1 minute by 200 m).
inline std::int64_t box_temporal_minutes(const AnonBox& b) { return b.span_t(); }

inline std::int64_t box_spatial_metres(const AnonBox& b) {
    return (b.span_x() + b.span_y()) * 100;
}

struct GranularityStats {
    SummaryStats temporal_min;
    SummaryStats spatial_m;
    /// Per hour-of-day means, bucketed by each box's midpoint slot.
    std::array<double, 24> hourly_spatial_m{};
    std::array<double, 24> hourly_temporal_min{};
    std::array<std::size_t, 24> hourly_boxes{};
};

inline int hour_of_slot(Coord t) { return static_cast<int>((t / 60) % 24); }

inline GranularityStats granularity_stats(const PublishedDataset& p) {
    GranularityStats g;
    std::vector<std::int64_t> tvals, svals;
    std::array<double, 24> tsum{}, ssum{};
    for (const auto& [user, boxes] : p.records)
        for (const auto& b : boxes) {
            const std::int64_t tm = box_temporal_minutes(b);
            const std::int64_t sm = box_spatial_metres(b);
            tvals.push_back(tm);
            svals.push_back(sm);
            const int h = hour_of_slot((b.t_min + b.t_max) / 2);
            tsum[static_cast<std::size_t>(h)] += static_cast<double>(tm);
            ssum[static_cast<std::size_t>(h)] += static_cast<double>(sm);
            ++g.hourly_boxes[static_cast<std::size_t>(h)];
        }
    g.temporal_min = summarize(tvals);
    g.spatial_m = summarize(svals);
    for (std::size_t h = 0; h < 24; ++h) {
        if (g.hourly_boxes[h] == 0) continue;
        g.hourly_temporal_min[h] = tsum[h] / static_cast<double>(g.hourly_boxes[h]);
        g.hourly_spatial_m[h] = ssum[h] / static_cast<double>(g.hourly_boxes[h]);
    }
    return g;
}

struct SuppressionStats {
    std::size_t suppressed_samples = 0;
    std::size_t total_samples = 0;
    double rate = 0.0;
    /// Suppressed / total raw samples whose slot falls in each hour of day.
    std::array<std::size_t, 24> hourly_suppressed{};
    std::array<std::size_t, 24> hourly_total{};
    std::array<double, 24> hourly_rate{};
};

/// Fraction of raw samples removed by suppression. A log entry (user, epoch)
/// removes exactly that user's samples with slots inside the epoch.
inline SuppressionStats suppression_rate(const Dataset& raw, const SuppressionLog& log,
                                          Coord epsilon) {
    if (epsilon < 1) throw std::invalid_argument("epsilon must be >= 1");
    SuppressionStats s;
    for (const auto& [user, tr] : raw.trajectories)
        for (const auto& smp : tr.samples()) {
            ++s.total_samples;
            const int h = hour_of_slot(smp.t);
            ++s.hourly_total[static_cast<std::size_t>(h)];
            if (log.count({user, epoch_of(smp.t, epsilon)}) != 0) {
                ++s.suppressed_samples;
                ++s.hourly_suppressed[static_cast<std::size_t>(h)];
            }
        }
    if (s.total_samples > 0)
        s.rate = static_cast<double>(s.suppressed_samples) /
                 static_cast<double>(s.total_samples);
    for (std::size_t h = 0; h < 24; ++h)
        if (s.hourly_total[h] > 0)
            s.hourly_rate[h] = static_cast<double>(s.hourly_suppressed[h]) /
                               static_cast<double>(s.hourly_total[h]);
    return s;
}

} // namespace trajanon
