#pragma once

// Exhaustive reference implementation used by tests to certify the DP merge.
// It enumerates every admissible partition directly and shares nothing with
// the scan in merge.hpp beyond the cost definitions themselves.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "trajanon/merge.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

/// Minimum-cost merge by brute force. Time coherence forces every admissible
/// partition to be a contiguous segmentation of the time-sorted pool with
/// cuts only between strictly increasing timestamps, so enumerating all cut
/// subsets is exhaustive. Intended for small instances only.
inline MergeResult brute_force_merge(const MergeInput& input, std::size_t max_samples = 14) {
    MergePool pool(input);
    const std::size_t n = pool.size();
    if (n > max_samples)
        throw std::invalid_argument("brute_force_merge: pool exceeds configured bound");

    std::vector<std::size_t> cut_positions; // cut before pool position p
    for (std::size_t p = 1; p < n; ++p)
        if (pool.cut_allowed_before(p)) cut_positions.push_back(p);

    const auto& s = pool.samples();
    const std::uint64_t masks = 1ULL << cut_positions.size();
    bool found = false;
    Cost best_cost = 0;
    std::vector<std::size_t> best_cuts;

    for (std::uint64_t mask = 0; mask < masks; ++mask) {
        std::vector<std::size_t> cuts;
        for (std::size_t i = 0; i < cut_positions.size(); ++i)
            if (mask & (1ULL << i)) cuts.push_back(cut_positions[i]);

        bool ok = true;
        Cost total = 0;
        std::size_t begin = 0;
        for (std::size_t ci = 0; ci <= cuts.size() && ok; ++ci) {
            const std::size_t end = (ci < cuts.size()) ? cuts[ci] : n;
            if (!is_complete(pool, begin, end)) {
                ok = false;
                break;
            }
            Bounds b = Bounds::of(s[begin]);
            for (std::size_t i = begin + 1; i < end; ++i) b.expand(s[i]);
            total += b.span_t() * (b.span_x() + b.span_y());
            begin = end;
        }
        if (ok && (!found || total < best_cost)) {
            found = true;
            best_cost = total;
            best_cuts = cuts;
        }
    }

    if (!found) throw std::logic_error("brute_force_merge: no admissible partition");

    MergeResult result;
    result.cost = best_cost;
    std::size_t begin = 0;
    for (std::size_t ci = 0; ci <= best_cuts.size(); ++ci) {
        const std::size_t end = (ci < best_cuts.size()) ? best_cuts[ci] : n;
        result.cells.emplace_back(std::vector<Sample>(
            s.begin() + static_cast<std::ptrdiff_t>(begin),
            s.begin() + static_cast<std::ptrdiff_t>(end)));
        begin = end;
    }
    return result;
}

} // namespace trajanon
