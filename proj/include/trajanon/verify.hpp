#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajanon/anonymize.hpp"
#include "trajanon/data.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

/// A record is consistent with a piece of knowledge when every known sample
/// lies inside one of its boxes. Records keep disjoint, sorted time ranges,
/// so each sample has at most one candidate box.
inline bool consistent(const std::vector<AnonBox>& record, const std::vector<Sample>& knowledge) {
    for (const auto& s : knowledge) {
        auto it = std::upper_bound(record.begin(), record.end(), s.t,
                                   [](Coord t, const AnonBox& b) { return t < b.t_min; });
        if (it == record.begin()) return false;
        if (!std::prev(it)->contains(s)) return false;
    }
    return true;
}

enum class VerifyMode { exhaustive, sampled };

struct VerifyFailure {
    UserId user;
    Coord window_start = 0;
    std::size_t consistency = 0;
};

struct VerificationReport {
    VerifyMode mode = VerifyMode::exhaustive;
    int k = 0;
    std::size_t probes = 0;
    std::size_t windows_checked = 0;
    std::size_t suppression_protected = 0;
    std::size_t min_consistency = 0;
    std::vector<VerifyFailure> failures;

    bool pass() const { return failures.empty(); }

    std::string render() const {
        std::ostringstream os;
        os << "mode: " << (mode == VerifyMode::exhaustive ? "exhaustive" : "sampled") << '\n'
           << "k: " << k << '\n'
           << "probes: " << probes << '\n'
           << "windows_checked: " << windows_checked << '\n'
           << "suppression_protected: " << suppression_protected << '\n'
           << "min_consistency: " << min_consistency << '\n'
           << "failures: " << failures.size() << '\n'
           << "pass: " << (pass() ? "yes" : "no") << '\n';
        std::size_t shown = 0;
        for (const auto& f : failures) {
            if (++shown > 20) {
                os << "witness: ...\n";
                break;
            }
            os << "witness: user=" << f.user << " window_start=" << f.window_start
               << " consistency=" << f.consistency << '\n';
        }
        return os.str();
    }
};

namespace detail {

struct ProbeContext {
    const std::map<UserId, std::vector<AnonBox>>* records = nullptr;
    int k = 0;
    VerificationReport* report = nullptr;
};

inline void run_probe(const ProbeContext& ctx, const UserId& victim,
                      const std::vector<AnonBox>* own, Coord window_start,
                      const std::vector<Sample>& knowledge) {
    if (knowledge.empty()) return;
    auto& rep = *ctx.report;
    ++rep.probes;
    if (own == nullptr || !consistent(*own, knowledge)) {
        ++rep.suppression_protected;
        return;
    }
    std::size_t count = 0;
    for (const auto& [user, record] : *ctx.records)
        if (consistent(record, knowledge)) ++count;
    if (rep.windows_checked == 0 || count < rep.min_consistency) rep.min_consistency = count;
    ++rep.windows_checked;
    if (count < static_cast<std::size_t>(ctx.k))
        rep.failures.push_back({victim, window_start, count});
}

} // namespace detail

/// Replay the adversary against a published dataset. Knowledge is a user's
/// raw samples inside a window of tau slots; a probe passes when at least k
/// records cover all of it. Windows whose samples were partly withheld
/// cannot arm the adversary and count as suppression-protected.
///
/// Exhaustive mode probes, for every user, every epoch-aligned span of
/// w + 1 epochs plus every window starting at one of the user's own
/// samples; together these dominate all possible windows, because shrinking
/// a window's knowledge can only make more records consistent. Sampled mode
/// draws seeded random aligned probes instead.
inline VerificationReport verify(const Dataset& raw, const PublishedDataset& anon,
                                 const AnonConfig& cfg, VerifyMode mode,
                                 std::size_t n_probes = 1000, std::uint64_t seed = 1) {
    cfg.validate();
    if (anon.meta.k && *anon.meta.k != cfg.k)
        throw std::invalid_argument("k disagrees with published metadata");
    if (anon.meta.tau && *anon.meta.tau != cfg.tau)
        throw std::invalid_argument("tau disagrees with published metadata");
    if (anon.meta.epsilon && *anon.meta.epsilon != cfg.epsilon)
        throw std::invalid_argument("epsilon disagrees with published metadata");

    VerificationReport rep;
    rep.mode = mode;
    rep.k = cfg.k;
    if (raw.trajectories.empty()) return rep;

    const std::int64_t w = cfg.w();
    const std::int64_t total_epochs = epoch_of(raw.max_t(), cfg.epsilon);
    detail::ProbeContext ctx{&anon.records, cfg.k, &rep};

    const auto own_record = [&anon](const UserId& u) -> const std::vector<AnonBox>* {
        auto it = anon.records.find(u);
        return it == anon.records.end() ? nullptr : &it->second;
    };

    if (mode == VerifyMode::exhaustive) {
        for (const auto& [u, tr] : raw.trajectories) {
            const auto* own = own_record(u);
            for (std::int64_t e = 1; e <= total_epochs; ++e) {
                const Coord lo = epoch_first_slot(e, cfg.epsilon);
                const Coord hi = lo + (w + 1) * cfg.epsilon;
                detail::run_probe(ctx, u, own, lo, samples_between(tr, lo, hi));
            }
            const auto& samples = tr.samples();
            for (std::size_t f = 0; f < samples.size(); ++f) {
                if (f > 0 && samples[f].t == samples[f - 1].t) continue;
                const Coord lo = samples[f].t;
                detail::run_probe(ctx, u, own, lo, samples_between(tr, lo, lo + cfg.tau));
            }
        }
    } else {
        std::vector<const UserId*> users;
        users.reserve(raw.trajectories.size());
        for (const auto& [u, tr] : raw.trajectories) users.push_back(&u);
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < n_probes; ++i) {
            const UserId& u = *users[rng() % users.size()];
            const auto e = static_cast<std::int64_t>(
                1 + rng() % static_cast<std::uint64_t>(total_epochs));
            const Coord lo = epoch_first_slot(e, cfg.epsilon);
            const Coord hi = lo + (w + 1) * cfg.epsilon;
            detail::run_probe(ctx, u, own_record(u),
                              lo, samples_between(raw.trajectories.at(u), lo, hi));
        }
    }
    return rep;
}

struct HidingConfigCount {
    /// Distinct full peer assignments: k - 1 permutation layers over the
    /// group with no self-picks and no repeats down a column.
    std::uint64_t kpick_count = 0;
    /// Distinct partitions of the group into blocks of k, the number of
    /// configurations a scheme with mutually consistent groups could emit.
    std::uint64_t full_consistency_count = 0;
};

/// Count the hiding configurations over a group of `users` members. Sizes
/// are kept tiny on purpose; the point is exact combinatorial ground truth.
inline HidingConfigCount count_hiding_configs(std::size_t users, int k) {
    if (k < 2 || k > 3) throw std::invalid_argument("k must be 2 or 3");
    if (users < static_cast<std::size_t>(k) || users > 8)
        throw std::invalid_argument("users must be in [k, 8]");
    if (users % static_cast<std::size_t>(k) != 0)
        throw std::invalid_argument("users must be a multiple of k");

    const std::size_t layers = static_cast<std::size_t>(k) - 1;
    const std::size_t n = users;

    // Column-by-column backtracking over the layer permutations. The
    // values already placed in the current column live in `chosen`, which
    // deeper columns never touch, so backtracking cannot leak picks
    // between columns.
    std::vector<std::vector<char>> taken(layers, std::vector<char>(n, 0));
    std::vector<std::vector<std::size_t>> chosen(layers, std::vector<std::size_t>(n, 0));
    std::uint64_t assignments = 0;
    const auto dfs = [&](auto&& self, std::size_t col, std::size_t layer) -> void {
        if (layer == layers) {
            if (col + 1 == n)
                ++assignments;
            else
                self(self, col + 1, 0);
            return;
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (v == col || taken[layer][v]) continue;
            bool clash = false;
            for (std::size_t l2 = 0; l2 < layer; ++l2)
                if (chosen[l2][col] == v) clash = true;
            if (clash) continue;
            taken[layer][v] = 1;
            chosen[layer][col] = v;
            self(self, col, layer + 1);
            taken[layer][v] = 0;
        }
    };
    dfs(dfs, 0, 0);

    // users! / ((k!)^(users/k) * (users/k)!)
    std::uint64_t part = 1;
    for (std::size_t i = 2; i <= n; ++i) part *= i;
    std::uint64_t kfact = 1;
    for (int i = 2; i <= k; ++i) kfact *= static_cast<std::uint64_t>(i);
    const std::size_t blocks = n / static_cast<std::size_t>(k);
    for (std::size_t b = 0; b < blocks; ++b) part /= kfact;
    for (std::size_t b = 2; b <= blocks; ++b) part /= b;

    return {assignments, part};
}

} // namespace trajanon
