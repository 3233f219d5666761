#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "trajanon/cluster.hpp"
#include "trajanon/data.hpp"
#include "trajanon/detail/mix.hpp"
#include "trajanon/merge.hpp"
#include "trajanon/metrics.hpp"
#include "trajanon/model.hpp"

namespace trajanon {

struct AnonConfig {
    int k = 2;
    Coord tau = 60;     // adversary window length, in slots
    Coord epsilon = 60; // epoch length, in slots
    std::size_t cluster_target = 50;
    std::uint64_t seed = 1;

    /// Number of whole epochs spanned by the adversary window beyond the
    /// first: a window of tau slots touches at most w + 1 epochs.
    std::int64_t w() const { return tau / epsilon; }

    /// Upper bound on users merged into one owner's epoch: the owner plus
    /// k - 1 peers from each of the at most w + 1 anchors covering it.
    int chi() const { return 1 + static_cast<int>(w() + 1) * (k - 1); }

    void validate() const {
        if (k < 2) throw std::invalid_argument("k must be >= 2");
        if (epsilon < 1) throw std::invalid_argument("epsilon must be >= 1");
        if (tau < epsilon) throw std::invalid_argument("tau must be >= epsilon");
        if (tau % epsilon != 0) throw std::invalid_argument("tau must be a multiple of epsilon");
        if (cluster_target < 1) throw std::invalid_argument("cluster_target must be >= 1");
    }
};

/// One successful assignment round. The anchor epoch's hiding sets protect
/// every epoch in [anchor, anchor + w]: each member's k - 1 peers stay
/// merged with them across that whole span.
struct RoundAssignment {
    std::int64_t anchor = 0;
    std::vector<UserId> members;
    std::map<UserId, std::vector<UserId>> hiding;
};

/// Members of one cluster at the current epoch, regrouped by their label
/// history over [from_epoch, to_epoch]. Users absent from any history epoch
/// fall into `absent` and take no part in the round.
struct HistorySplit {
    std::vector<std::vector<UserId>> groups;
    std::vector<UserId> absent;
};

inline HistorySplit split_by_history(const std::vector<Clustering>& per_epoch,
                                     const std::vector<UserId>& members,
                                     std::int64_t from_epoch, std::int64_t to_epoch) {
    HistorySplit out;
    std::map<std::vector<int>, std::vector<UserId>> by_hist;
    for (const auto& u : members) {
        std::vector<int> hist;
        bool present = true;
        for (std::int64_t e = from_epoch; e <= to_epoch; ++e) {
            const int l = per_epoch[static_cast<std::size_t>(e)].label_of(u);
            if (l < 0) {
                present = false;
                break;
            }
            hist.push_back(l);
        }
        if (present)
            by_hist[hist].push_back(u);
        else
            out.absent.push_back(u);
    }
    for (auto& [hist, g] : by_hist) {
        std::sort(g.begin(), g.end());
        out.groups.push_back(std::move(g));
    }
    std::sort(out.absent.begin(), out.absent.end());
    return out;
}

/// Peer-exclusion record: peers already spent on an owner at earlier
/// anchors. Hiding sets for one owner must stay disjoint across anchors,
/// otherwise repeat pairings would let window knowledge accumulate.
using UsedPeers = std::map<UserId, std::set<UserId>>;

/// Whether `candidate` may still join `owner`'s hiding set: no self-picks,
/// and no repeat of a pairing recorded for this owner at an earlier anchor.
/// The exclusion is directional; the reverse pairing stays available.
inline bool hiding_edge(const UsedPeers& used, const UserId& owner, const UserId& candidate) {
    if (owner == candidate) return false;
    const auto it = used.find(owner);
    return it == used.end() || it->second.count(candidate) == 0;
}

namespace detail {

template <typename CostFn>
std::vector<std::size_t> nearest_neighbour_order(const std::vector<UserId>& group,
                                                 const CostFn& cost) {
    const std::size_t n = group.size();
    std::vector<std::size_t> order;
    std::vector<char> seen(n, 0);
    order.reserve(n);
    order.push_back(0);
    seen[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t last = order.back();
        std::size_t best = n;
        Cost best_c = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (seen[j]) continue;
            const Cost c = cost(group[last], group[j]);
            if (best == n || c < best_c) {
                best = j;
                best_c = c;
            }
        }
        order.push_back(best);
        seen[best] = 1;
    }
    return order;
}

inline bool rotation_ok(const std::vector<UserId>& group,
                        const std::vector<std::size_t>& order, std::size_t r,
                        const UsedPeers& used) {
    const std::size_t n = order.size();
    for (std::size_t i = 0; i < n; ++i)
        if (!hiding_edge(used, group[order[i]], group[order[(i + n - r) % n]])) return false;
    return true;
}

inline std::optional<std::map<UserId, std::vector<UserId>>>
rotation_layers(const std::vector<UserId>& group, const std::vector<std::size_t>& order,
                int k, const UsedPeers& used) {
    const std::size_t n = order.size();
    std::vector<std::size_t> picked;
    for (std::size_t r = 1; r < n && picked.size() < static_cast<std::size_t>(k - 1); ++r)
        if (rotation_ok(group, order, r, used)) picked.push_back(r);
    if (picked.size() < static_cast<std::size_t>(k - 1)) return std::nullopt;

    std::map<UserId, std::vector<UserId>> hiding;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<UserId> peers;
        for (const auto r : picked) peers.push_back(group[order[(i + n - r) % n]]);
        std::sort(peers.begin(), peers.end());
        hiding[group[order[i]]] = std::move(peers);
    }
    return hiding;
}

} // namespace detail

/// Assign each group member k - 1 distinct peers, no self, respecting the
/// exclusion record, such that every member also serves in exactly k - 1
/// other hiding sets. Each layer is a rotation of a cyclic ordering:
/// rotation r hands every member the peer r positions back, a permutation
/// without fixed points, and distinct rotation amounts give every member
/// distinct peers. The ordering chains cheap merges (greedy nearest
/// neighbour on the cost function, ties to the smallest index); rotation
/// amounts are scanned smallest-first for k - 1 amounts the exclusion
/// record permits, and if the ordering admits too few, up to 32 seeded
/// reshuffles are tried.
template <typename CostFn>
std::optional<std::map<UserId, std::vector<UserId>>>
greedy_cycles(const std::vector<UserId>& group, const CostFn& cost, const UsedPeers& used,
              int k, std::uint64_t seed) {
    const std::size_t n = group.size();
    if (k < 2 || n < static_cast<std::size_t>(k)) return std::nullopt;

    std::vector<std::size_t> order = detail::nearest_neighbour_order(group, cost);
    if (auto h = detail::rotation_layers(group, order, k, used)) return h;
    std::mt19937_64 rng(seed);
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::shuffle(order.begin(), order.end(), rng);
        if (auto h = detail::rotation_layers(group, order, k, used)) return h;
    }
    return std::nullopt;
}

struct RunReport {
    Cost total_cost = 0;
    std::int64_t median_temporal_min = 0;
    std::int64_t median_spatial_m = 0;
    double suppression_pct = 0.0;
    std::int64_t epochs = 0;
    std::size_t users = 0;
    std::size_t records = 0;
    std::size_t boxes = 0;
    std::size_t valid_rounds = 0;
    std::size_t failed_rounds = 0;
    /// Published (owner, epoch) pairs that either lack an anchor or where a
    /// designated peer contributed no samples. Flagged for auditing; the
    /// consistency check decides whether the output is still safe.
    std::size_t weak_coverage = 0;

    std::string render() const {
        std::ostringstream os;
        os << "users: " << users << '\n'
           << "epochs: " << epochs << '\n'
           << "records: " << records << '\n'
           << "boxes: " << boxes << '\n'
           << "total_cost: " << total_cost << '\n'
           << "median_temporal_min: " << median_temporal_min << '\n'
           << "median_spatial_m: " << median_spatial_m << '\n'
           << "suppression_pct: " << suppression_pct << '\n'
           << "valid_rounds: " << valid_rounds << '\n'
           << "failed_rounds: " << failed_rounds << '\n'
           << "weak_coverage: " << weak_coverage << '\n';
        return os.str();
    }
};

struct AnonymizeResult {
    PublishedDataset published;
    /// Owner -> epoch -> users whose samples were merged into that owner's
    /// cells for the epoch (the owner itself included).
    std::map<UserId, std::map<std::int64_t, std::vector<UserId>>> participants;
    SuppressionLog suppressed;
    std::vector<RoundAssignment> rounds;
    /// Groups whose peer assignment failed, with the anchor epoch that was
    /// suppressed for them as a consequence.
    std::vector<std::pair<std::int64_t, std::vector<UserId>>> failed;
    RunReport report;
};

namespace detail {

inline bool has_epoch(const std::vector<std::int64_t>& sorted, std::int64_t e) {
    return std::binary_search(sorted.begin(), sorted.end(), e);
}

} // namespace detail

/// Full pipeline: per-epoch clustering, peer assignment rounds, suppression
/// closure, then per-owner publication. Deterministic for a fixed seed.
inline AnonymizeResult anonymize(const Dataset& raw, const AnonConfig& cfg) {
    cfg.validate();
    if (raw.trajectories.empty()) throw std::invalid_argument("empty dataset");
    const std::int64_t w = cfg.w();
    const std::int64_t total_epochs = epoch_of(raw.max_t(), cfg.epsilon);
    if (total_epochs < w + 1)
        throw std::invalid_argument("dataset spans fewer epochs than the protection window");

    // Epoch-indexed clusterings (index 0 unused).
    std::vector<CostMatrix> mats(static_cast<std::size_t>(total_epochs) + 1);
    std::vector<Clustering> clus(static_cast<std::size_t>(total_epochs) + 1);
    for (std::int64_t e = 1; e <= total_epochs; ++e) {
        auto& m = mats[static_cast<std::size_t>(e)];
        m = pairwise_costs(raw, e, cfg.epsilon);
        if (m.size() == 0) continue;
        const auto present = m.size();
        auto n_clusters = (present + cfg.cluster_target - 1) / cfg.cluster_target;
        n_clusters = std::min(std::max<std::size_t>(n_clusters, 1), present);
        clus[static_cast<std::size_t>(e)] =
            spectral_cluster(m, static_cast<int>(n_clusters),
                             detail::mix(cfg.seed, 0xC1A0ULL, static_cast<std::uint64_t>(e)));
    }

    AnonymizeResult out;
    SuppressionLog suppressed;
    UsedPeers used;

    // Assignment rounds. The round at epoch t anchors m = t - w: members must
    // share cluster history over [m, t - 1] and sit in one cluster at t, so
    // their merges stay cheap across the anchored span.
    for (std::int64_t t = w + 1; t <= total_epochs; ++t) {
        const auto& c = clus[static_cast<std::size_t>(t)];
        if (c.users.empty()) continue;
        const std::int64_t m = t - w;
        std::vector<std::vector<UserId>> by_label(static_cast<std::size_t>(c.n_clusters));
        for (std::size_t i = 0; i < c.users.size(); ++i)
            by_label[static_cast<std::size_t>(c.labels[i])].push_back(c.users[i]);

        const auto& mat = mats[static_cast<std::size_t>(t)];
        const auto cost_of = [&mat](const UserId& a, const UserId& b) {
            const auto& us = mat.users();
            const auto ia = static_cast<std::size_t>(
                std::lower_bound(us.begin(), us.end(), a) - us.begin());
            const auto ib = static_cast<std::size_t>(
                std::lower_bound(us.begin(), us.end(), b) - us.begin());
            return mat.at(ia, ib);
        };

        std::uint64_t group_ordinal = 0;
        for (const auto& members : by_label) {
            HistorySplit split = split_by_history(clus, members, m, t - 1);
            for (const auto& g : split.groups) {
                const std::uint64_t gs =
                    detail::mix(cfg.seed, 0x524F54ULL, static_cast<std::uint64_t>(t),
                                group_ordinal++);
                auto hiding = greedy_cycles(g, cost_of, used, cfg.k, gs);
                if (!hiding) {
                    for (const auto& u : g) suppressed.insert({u, m});
                    out.failed.emplace_back(m, g);
                    continue;
                }
                for (const auto& [owner, peers] : *hiding)
                    used[owner].insert(peers.begin(), peers.end());
                out.rounds.push_back({m, g, std::move(*hiding)});
            }
        }
    }

    // Epochs in which each user actually has samples.
    std::map<UserId, std::vector<std::int64_t>> epochs_of_user;
    for (const auto& [u, tr] : raw.trajectories) {
        auto& v = epochs_of_user[u];
        for (const auto& s : tr.samples()) {
            const std::int64_t e = epoch_of(s.t, cfg.epsilon);
            if (v.empty() || v.back() != e) v.push_back(e);
        }
    }

    // For each user, the k - 1 owners who picked them at each anchor. An
    // anchor protects one of the user's epochs only while every picking
    // owner still publishes that epoch, because it is those owners' records
    // that must stay consistent with the adversary's knowledge.
    std::map<UserId, std::map<std::int64_t, std::vector<UserId>>> pickers_of;
    for (const auto& r : out.rounds)
        for (const auto& [owner, peers] : r.hiding)
            for (const auto& p : peers) pickers_of[p][r.anchor].push_back(owner);

    // Suppression closure, iterated to a fixpoint. Walking each user's
    // epochs in order and keeping epoch e only when a single anchor covers
    // e together with all kept epochs within w of it guarantees that every
    // epoch-aligned knowledge window over published samples has one anchor
    // whose pickers' records all contain it; anything weaker is withheld.
    // Consistency is checked over aligned windows of w + 1 epochs, so two
    // published epochs within w of each other are always tied, whatever
    // the gap between their samples.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& [u, ev] : epochs_of_user) {
            const auto pit = pickers_of.find(u);
            std::vector<std::int64_t> kept;
            for (const auto e : ev) {
                if (suppressed.count({u, e}) != 0) continue;
                auto kit = std::lower_bound(kept.begin(), kept.end(), e - w);
                std::vector<std::int64_t> window(kit, kept.end());
                window.push_back(e);
                bool ok = false;
                if (pit != pickers_of.end()) {
                    auto mit = pit->second.lower_bound(e - w);
                    for (; !ok && mit != pit->second.end() && mit->first <= window.front();
                         ++mit) {
                        ok = true;
                        for (const auto f : window) {
                            for (const auto& owner : mit->second) {
                                if (suppressed.count({owner, f}) != 0 ||
                                    !detail::has_epoch(epochs_of_user.at(owner), f)) {
                                    ok = false;
                                    break;
                                }
                            }
                            if (!ok) break;
                        }
                    }
                }
                if (ok) {
                    kept.push_back(e);
                } else {
                    suppressed.insert({u, e});
                    changed = true;
                }
            }
        }
    }

    // Publication. For each owner epoch, pool the owner with the hiding-set
    // peers of every anchor covering the epoch and merge into cells.
    std::map<UserId, std::map<std::int64_t, std::vector<UserId>>> hiding_of;
    for (const auto& r : out.rounds)
        for (const auto& [owner, peers] : r.hiding) hiding_of[owner][r.anchor] = peers;

    Cost total_cost = 0;
    std::size_t n_boxes = 0;
    for (const auto& [u, tr] : raw.trajectories) {
        std::vector<AnonBox> boxes;
        const auto hit = hiding_of.find(u);
        for (const auto e : epochs_of_user[u]) {
            if (suppressed.count({u, e}) != 0) continue;
            std::vector<UserId> parts{u};
            if (hit != hiding_of.end()) {
                auto mit = hit->second.lower_bound(e - w);
                for (; mit != hit->second.end() && mit->first <= e; ++mit)
                    parts.insert(parts.end(), mit->second.begin(), mit->second.end());
            }
            const bool unanchored = parts.size() == 1;
            std::sort(parts.begin(), parts.end());

            const Coord lo = epoch_first_slot(e, cfg.epsilon);
            const Coord hi = epoch_end_slot(e, cfg.epsilon);
            MergeInput in;
            std::vector<UserId> included;
            for (const auto& p : parts) {
                if (p != u && suppressed.count({p, e}) != 0) continue;
                auto slice = samples_between(raw.trajectories.at(p), lo, hi);
                if (slice.empty()) continue;
                included.push_back(p);
                in.trajectories.emplace_back(p, std::move(slice));
            }
            // A designated peer contributing nothing weakens the epoch; it
            // is flagged here and the consistency check arbitrates.
            if (unanchored || included.size() < parts.size()) ++out.report.weak_coverage;
            MergeResult mr = kmerge(in);
            total_cost += mr.cost;
            for (const auto& cell : mr.cells) boxes.push_back(box_of(cell.bounds()));
            out.participants[u][e] = std::move(included);
        }
        if (!boxes.empty()) {
            n_boxes += boxes.size();
            out.published.records[u] = std::move(boxes);
        }
    }

    for (const auto& [u, e] : suppressed)
        if (detail::has_epoch(epochs_of_user[u], e)) out.suppressed.insert({u, e});

    out.published.meta.k = cfg.k;
    out.published.meta.tau = cfg.tau;
    out.published.meta.epsilon = cfg.epsilon;
    out.published.meta.seed = cfg.seed;
    out.published.meta.origin_iso = raw.origin_iso;

    out.report.total_cost = total_cost;
    out.report.epochs = total_epochs;
    out.report.users = raw.trajectories.size();
    out.report.records = out.published.records.size();
    out.report.boxes = n_boxes;
    out.report.valid_rounds = out.rounds.size();
    out.report.failed_rounds = out.failed.size();
    const GranularityStats g = granularity_stats(out.published);
    out.report.median_temporal_min = g.temporal_min.count ? g.temporal_min.median : 0;
    out.report.median_spatial_m = g.spatial_m.count ? g.spatial_m.median : 0;
    out.report.suppression_pct =
        100.0 * suppression_rate(raw, out.suppressed, cfg.epsilon).rate;
    return out;
}

} // namespace trajanon
