#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "trajanon/data.hpp"
#include "trajanon/detail/mix.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

/// Synthetic mobility generator. Users commute between a home anchor and a
/// work anchor on a 100 m grid; events arrive as a time-inhomogeneous
/// Poisson stream with a two-level diurnal profile. Slot unit is one minute.
struct GenConfig {
    std::int64_t users = 100;
    std::int64_t days = 14;
    double rate_per_hour = 0.9;        // mean samples per user-hour
    double day_night_ratio = 3.0;      // day rate / night rate, profile mean stays 1
    std::uint64_t seed = 1;
    std::int64_t grid = 200;           // square grid side in cells
    std::int64_t time_coarse_min = 0;  // >0: quantize stamps, then uniform re-noise in bin
    std::string origin_iso = "2026-01-05T00:00:00Z";

    void validate() const {
        if (users < 1) throw std::invalid_argument("users must be >= 1");
        if (days < 1) throw std::invalid_argument("days must be >= 1");
        if (rate_per_hour <= 0) throw std::invalid_argument("rate_per_hour must be > 0");
        if (day_night_ratio <= 0) throw std::invalid_argument("day_night_ratio must be > 0");
        if (grid < 16) throw std::invalid_argument("grid must be >= 16");
        if (time_coarse_min < 0) throw std::invalid_argument("time_coarse_min must be >= 0");
    }
};

namespace detail {

constexpr bool is_day_hour(std::int64_t hour_of_day) {
    return hour_of_day >= 8 && hour_of_day < 20;
}

struct Hub {
    Coord x, y;
};

inline Coord clamp_grid(std::int64_t v, std::int64_t grid) {
    return std::max<std::int64_t>(0, std::min(grid - 1, v));
}

} // namespace detail

inline Dataset generate(const GenConfig& cfg) {
    cfg.validate();

    // Work anchors concentrate in a few business hubs, homes spread across
    // more residential hubs; that gives daytime crowds that cluster well.
    std::mt19937_64 hub_rng(detail::mix(cfg.seed, 0x48554253ULL));
    const std::int64_t n_biz = std::max<std::int64_t>(2, cfg.users / 64);
    const std::int64_t n_res = std::max<std::int64_t>(4, cfg.users / 32);
    const std::int64_t margin = std::min<std::int64_t>(10, cfg.grid / 4);
    auto draw_hub = [&]() {
        std::uniform_int_distribution<std::int64_t> d(margin, cfg.grid - 1 - margin);
        detail::Hub h{d(hub_rng), d(hub_rng)};
        return h;
    };
    std::vector<detail::Hub> biz, res;
    for (std::int64_t i = 0; i < n_biz; ++i) biz.push_back(draw_hub());
    for (std::int64_t i = 0; i < n_res; ++i) res.push_back(draw_hub());

    const double night_factor = 2.0 / (1.0 + cfg.day_night_ratio);
    const double day_factor = cfg.day_night_ratio * night_factor;

    std::size_t id_width = std::to_string(cfg.users - 1).size();
    auto user_id = [&](std::int64_t i) {
        std::string digits = std::to_string(i);
        return "u" + std::string(id_width - digits.size(), '0') + digits;
    };

    std::vector<Sample> samples;
    for (std::int64_t u = 0; u < cfg.users; ++u) {
        std::mt19937_64 rng(detail::mix(cfg.seed, 0x55534552ULL, static_cast<std::uint64_t>(u)));
        const UserId id = user_id(u);

        std::uniform_int_distribution<std::int64_t> res_jit(-5, 5), biz_jit(-2, 2), ev_jit(-1, 1);
        const detail::Hub& hh = res[static_cast<std::size_t>(rng() % res.size())];
        const detail::Hub& wh = biz[static_cast<std::size_t>(rng() % biz.size())];
        const Coord home_x = detail::clamp_grid(hh.x + res_jit(rng), cfg.grid);
        const Coord home_y = detail::clamp_grid(hh.y + res_jit(rng), cfg.grid);
        const Coord work_x = detail::clamp_grid(wh.x + biz_jit(rng), cfg.grid);
        const Coord work_y = detail::clamp_grid(wh.y + biz_jit(rng), cfg.grid);

        std::set<Coord> used_minutes;
        for (std::int64_t day = 0; day < cfg.days; ++day) {
            for (std::int64_t hour = 0; hour < 24; ++hour) {
                const double lambda =
                    cfg.rate_per_hour * (detail::is_day_hour(hour) ? day_factor : night_factor);
                std::poisson_distribution<int> events(lambda);
                const int n = events(rng);
                for (int e = 0; e < n; ++e) {
                    std::uniform_int_distribution<std::int64_t> minute(0, 59);
                    Coord t = ((day * 24 + hour) * 60) + minute(rng);
                    if (cfg.time_coarse_min > 1) {
                        const Coord bin = t / cfg.time_coarse_min * cfg.time_coarse_min;
                        std::uniform_int_distribution<std::int64_t> noise(0,
                                                                          cfg.time_coarse_min - 1);
                        t = bin + noise(rng);
                    }
                    if (!used_minutes.insert(t).second) continue; // one fix per minute
                    const bool day_pos = detail::is_day_hour(hour);
                    const Coord ax = day_pos ? work_x : home_x;
                    const Coord ay = day_pos ? work_y : home_y;
                    samples.push_back(Sample{id, t, detail::clamp_grid(ax + ev_jit(rng), cfg.grid),
                                             detail::clamp_grid(ay + ev_jit(rng), cfg.grid)});
                }
            }
        }
        // Guarantee non-empty trajectories: an all-zero draw would otherwise
        // drop the user from the dataset entirely.
        if (used_minutes.empty()) {
            samples.push_back(Sample{id, 12 * 60, home_x, home_y});
        }
    }
    return make_dataset(std::move(samples), cfg.origin_iso);
}

} // namespace trajanon
