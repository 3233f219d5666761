#pragma once

#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajanon/model.hpp"

namespace trajanon {

/// Input to a k-way merge: one non-empty trajectory per distinct user.
struct MergeInput {
    std::vector<Trajectory> trajectories;

    void validate() const {
        if (trajectories.empty()) throw std::invalid_argument("merge of zero trajectories");
        for (const auto& tr : trajectories)
            if (tr.empty())
                throw std::invalid_argument("incompletable merge: empty trajectory for user " +
                                            tr.user());
        for (std::size_t i = 0; i < trajectories.size(); ++i)
            for (std::size_t j = i + 1; j < trajectories.size(); ++j)
                if (trajectories[i].user() == trajectories[j].user())
                    throw std::invalid_argument("duplicate user in merge input: " +
                                                trajectories[i].user());
    }
};

struct MergeOptions {
    // Cap on the candidate-window walk, in samples. 0 = unbounded (exact).
    std::size_t max_window = 0;
};

struct MergeResult {
    std::vector<GeneralizedSample> cells;
    Cost cost = 0;
};

/// The merged sample pool: all input samples in (t, user, x, y) order, with
/// each sample tagged by a compact index of its source trajectory.
class MergePool {
public:
    explicit MergePool(const MergeInput& input) {
        input.validate();
        user_count_ = input.trajectories.size();
        std::size_t total = 0;
        for (const auto& tr : input.trajectories) total += tr.size();
        samples_.reserve(total);
        std::vector<std::size_t> order(total);
        std::vector<std::size_t> src(total);
        {
            std::size_t pos = 0;
            for (std::size_t u = 0; u < input.trajectories.size(); ++u)
                for (const Sample& s : input.trajectories[u].samples()) {
                    samples_.push_back(s);
                    src[pos] = u;
                    ++pos;
                }
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return pool_less(samples_[a], samples_[b]);
        });
        std::vector<Sample> sorted;
        sorted.reserve(total);
        source_.resize(total);
        for (std::size_t i = 0; i < total; ++i) {
            sorted.push_back(samples_[order[i]]);
            source_[i] = src[order[i]];
        }
        samples_ = std::move(sorted);
    }

    const std::vector<Sample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    std::size_t user_count() const { return user_count_; }
    std::size_t source(std::size_t pos) const { return source_[pos]; }

    /// True when a cell boundary between positions pos-1 and pos respects
    /// strict time coherence (equal timestamps must share a cell).
    bool cut_allowed_before(std::size_t pos) const {
        return pos > 0 && pos < samples_.size() && samples_[pos - 1].t < samples_[pos].t;
    }

private:
    std::vector<Sample> samples_;
    std::vector<std::size_t> source_;
    std::size_t user_count_ = 0;
};

/// Window [first, last) holds at least one sample of every input trajectory.
inline bool is_complete(const MergePool& pool, std::size_t first, std::size_t last) {
    if (first >= last || last > pool.size()) return false;
    std::vector<char> seen(pool.user_count(), 0);
    std::size_t distinct = 0;
    for (std::size_t i = first; i < last; ++i) {
        if (!seen[pool.source(i)]) {
            seen[pool.source(i)] = 1;
            ++distinct;
        }
    }
    return distinct == pool.user_count();
}

/// A complete window is elementary when no admissible cut splits it into two
/// complete parts. Cuts are admissible only between strictly increasing
/// timestamps; splitting equal timestamps would break time coherence.
inline bool is_elementary(const MergePool& pool, std::size_t first, std::size_t last) {
    for (std::size_t cut = first + 1; cut < last; ++cut) {
        if (!pool.cut_allowed_before(cut)) continue;
        if (is_complete(pool, first, cut) && is_complete(pool, cut, last)) return false;
    }
    return true;
}

namespace detail {

constexpr Cost kInfCost = std::numeric_limits<Cost>::max();

inline Cost window_cost(const Bounds& b) {
    return b.span_t() * (b.span_x() + b.span_y());
}

} // namespace detail

/// Optimal k-way merge. Produces the minimum-cost partition of the pooled
/// samples into complete, time-coherent cells via a left-to-right scan:
/// for every end position the candidate start walks backwards, skipping
/// incomplete windows and stopping at the first non-elementary one (larger
/// windows can only be refined, so they never appear in an optimum). Ties
/// keep the first candidate found, making the result deterministic.
inline MergeResult kmerge(const MergeInput& input, const MergeOptions& opt = {}) {
    MergePool pool(input);
    const auto& s = pool.samples();
    const std::size_t n = pool.size();
    const std::size_t k = pool.user_count();
    const std::size_t none = n + 1;

    // start_max[b]: largest start a (1-based) with [a..b] complete; 0 = none.
    std::vector<std::size_t> start_max(n + 1, 0);
    {
        std::vector<std::size_t> cnt(k, 0);
        std::size_t distinct = 0, a = 1;
        for (std::size_t b = 1; b <= n; ++b) {
            if (cnt[pool.source(b - 1)]++ == 0) ++distinct;
            while (cnt[pool.source(a - 1)] > 1) {
                --cnt[pool.source(a - 1)];
                ++a;
            }
            start_max[b] = (distinct == k) ? a : 0;
        }
    }

    // min_end[a]: smallest end b with [a..b] complete; none if no such b.
    std::vector<std::size_t> min_end(n + 2, none);
    {
        std::vector<std::size_t> cnt(k, 0);
        std::size_t distinct = 0, b = 0;
        for (std::size_t a = 1; a <= n; ++a) {
            while (distinct < k && b < n) {
                ++b;
                if (cnt[pool.source(b - 1)]++ == 0) ++distinct;
            }
            min_end[a] = (distinct == k) ? b : none;
            // b >= a always holds here: the extension loop runs until the
            // window is non-empty (k >= 1) or b == n >= a.
            if (--cnt[pool.source(a - 1)] == 0) --distinct;
        }
    }

    // next_cut[j]: first admissible cut position >= j (cut j sits between
    // pool positions j and j+1); none past the last.
    std::vector<std::size_t> next_cut(n + 2, none);
    for (std::size_t j = n >= 1 ? n - 1 : 0; j >= 1; --j) {
        next_cut[j] = pool.cut_allowed_before(j) ? j : next_cut[j + 1];
        if (j == 1) break;
    }

    std::vector<Cost> best(n + 1, detail::kInfCost);
    std::vector<std::size_t> best_start(n + 1, 0);
    best[0] = 0;

    for (std::size_t b = 1; b <= n; ++b) {
        const std::size_t a0 = start_max[b];
        if (a0 == 0) continue;
        Bounds bounds = Bounds::of(s[a0 - 1]);
        for (std::size_t i = a0; i < b; ++i) bounds.expand(s[i]);
        for (std::size_t a = a0;; --a) {
            if (a < a0) bounds.expand(s[a - 1]);
            // Non-elementary: some admissible cut j leaves [a..j] and
            // [j+1..b] complete, i.e. min_end[a] <= j <= a0-1. Growing the
            // window keeps any such cut valid, so stop here.
            if (min_end[a] < none && a0 >= 1 && next_cut[min_end[a]] <= a0 - 1) break;
            if (opt.max_window != 0 && b - a + 1 > opt.max_window) break;
            if (a == 1 || pool.cut_allowed_before(a - 1)) {
                const Cost prev = best[a - 1];
                if (prev != detail::kInfCost) {
                    const Cost cand = prev + detail::window_cost(bounds);
                    if (cand < best[b]) {
                        best[b] = cand;
                        best_start[b] = a;
                    }
                }
            }
            if (a == 1) break;
        }
    }

    if (n == 0 || best[n] == detail::kInfCost)
        throw std::logic_error("merge has no admissible partition (window cap too small?)");

    MergeResult result;
    result.cost = best[n];
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t b = n; b > 0;) {
        const std::size_t a = best_start[b];
        ranges.emplace_back(a, b);
        b = a - 1;
    }
    for (auto it = ranges.rbegin(); it != ranges.rend(); ++it) {
        std::vector<Sample> members(s.begin() + static_cast<std::ptrdiff_t>(it->first - 1),
                                    s.begin() + static_cast<std::ptrdiff_t>(it->second));
        result.cells.emplace_back(std::move(members));
    }
    return result;
}

/// Checks the three merge conditions on a result: the cells partition the
/// input pool, every cell covers every input trajectory, and consecutive
/// cells are strictly time-separated. Cost recomputation is included.
inline bool validate_merge_result(const MergeInput& input, const MergeResult& result,
                                  std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    MergePool pool(input);
    std::vector<Sample> covered;
    for (const auto& cell : result.cells)
        covered.insert(covered.end(), cell.members().begin(), cell.members().end());
    std::sort(covered.begin(), covered.end(), pool_less);
    if (covered != pool.samples()) return fail("cells do not partition the sample pool");
    for (const auto& cell : result.cells)
        for (const auto& tr : input.trajectories)
            if (!cell.contains_user(tr.user()))
                return fail("cell missing user " + tr.user());
    if (!is_time_coherent(result.cells)) return fail("cells not time-coherent");
    Cost total = 0;
    for (const auto& cell : result.cells) total += cell.cost();
    if (total != result.cost) return fail("reported cost mismatch");
    return true;
}

} // namespace trajanon
