#include <catch2/catch_amalgamated.hpp>

#include <trajanon/anonymize.hpp>

#include <map>
#include <set>
#include <stdexcept>

using namespace trajanon;
using Catch::Matchers::ContainsSubstring;

namespace {

constexpr Cost kFlat = 2;
Cost flat_cost(const UserId&, const UserId&) { return kFlat; }

/// All of `users` co-located at one spot per epoch, epochs 1..n_epochs.
Dataset herd(const std::vector<UserId>& users, int n_epochs,
             Coord epsilon = 60, Coord x = 5, Coord y = 5) {
    std::vector<Sample> s;
    for (int e = 1; e <= n_epochs; ++e)
        for (const auto& u : users)
            s.push_back({u, epoch_first_slot(e, epsilon) + 10, x, y});
    return make_dataset(s);
}

void merge_samples(Dataset& into, const Dataset& extra) {
    std::vector<Sample> s;
    for (const auto& [u, tr] : into.trajectories)
        s.insert(s.end(), tr.samples().begin(), tr.samples().end());
    for (const auto& [u, tr] : extra.trajectories)
        s.insert(s.end(), tr.samples().begin(), tr.samples().end());
    into = make_dataset(s);
}

}  // namespace

TEST_CASE("config exposes window width and merge bound") {
    AnonConfig c;
    c.k = 2;
    c.tau = 60;
    c.epsilon = 60;
    CHECK(c.w() == 1);
    CHECK(c.chi() == 3);

    c.k = 3;
    c.tau = 120;
    CHECK(c.w() == 2);
    CHECK(c.chi() == 7);
}

TEST_CASE("config validation") {
    AnonConfig c;
    CHECK_NOTHROW(c.validate());

    AnonConfig bad = c;
    bad.k = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = c;
    bad.tau = 30;  // shorter than the epoch
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = c;
    bad.tau = 90;  // not a whole number of epochs
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = c;
    bad.cluster_target = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    bad = c;
    bad.epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("hiding edges forbid self-picks and repeat pairings, directionally") {
    UsedPeers used;
    CHECK(hiding_edge(used, "a", "b"));
    CHECK(hiding_edge(used, "b", "a"));
    CHECK_FALSE(hiding_edge(used, "a", "a"));

    used["a"].insert("b");
    CHECK_FALSE(hiding_edge(used, "a", "b"));
    CHECK(hiding_edge(used, "b", "a"));
    CHECK(hiding_edge(used, "a", "c"));
}

TEST_CASE("history split groups members by their label trail") {
    // epoch index 0 unused; epoch 1 holds the history of interest
    std::vector<Clustering> per_epoch(3);
    per_epoch[1] = Clustering{{"a", "b", "c"}, {0, 0, 1}, 2};
    per_epoch[2] = Clustering{{"a", "b", "c", "d"}, {0, 0, 0, 0}, 1};

    auto split = split_by_history(per_epoch, {"a", "b", "c"}, 1, 1);
    REQUIRE(split.groups.size() == 2);
    CHECK(split.groups[0] == std::vector<UserId>{"a", "b"});
    CHECK(split.groups[1] == std::vector<UserId>{"c"});
    CHECK(split.absent.empty());

    // co-clustered everywhere: a single group survives
    auto one = split_by_history(per_epoch, {"a", "b"}, 1, 1);
    REQUIRE(one.groups.size() == 1);
    CHECK(one.groups[0] == std::vector<UserId>{"a", "b"});

    // d has no label at epoch 1, so it sits out rather than being suppressed
    auto abs = split_by_history(per_epoch, {"a", "b", "d"}, 1, 1);
    REQUIRE(abs.groups.size() == 1);
    CHECK(abs.groups[0] == std::vector<UserId>{"a", "b"});
    CHECK(abs.absent == std::vector<UserId>{"d"});
}

TEST_CASE("cycle assignment hands every member distinct peers") {
    UsedPeers used;

    SECTION("three users, one peer each") {
        auto h = greedy_cycles({"a", "b", "c"}, flat_cost, used, 2, 1);
        REQUIRE(h.has_value());
        REQUIRE(h->size() == 3);
        std::map<UserId, int> picked;
        for (const auto& [owner, peers] : *h) {
            REQUIRE(peers.size() == 1);
            CHECK(peers[0] != owner);
            ++picked[peers[0]];
        }
        // every member serves in exactly one other hiding set
        for (const auto& [u, c] : picked) CHECK(c == 1);
    }

    SECTION("two users cannot support three-anonymity") {
        CHECK_FALSE(greedy_cycles({"a", "b"}, flat_cost, used, 3, 1).has_value());
    }

    SECTION("four users support three-anonymity") {
        auto h = greedy_cycles({"a", "b", "c", "d"}, flat_cost, used, 3, 1);
        REQUIRE(h.has_value());
        std::map<UserId, int> picked;
        for (const auto& [owner, peers] : *h) {
            REQUIRE(peers.size() == 2);
            CHECK(peers[0] != peers[1]);
            for (const auto& p : peers) {
                CHECK(p != owner);
                ++picked[p];
            }
        }
        for (const auto& [u, c] : picked) CHECK(c == 2);
    }

    SECTION("pairs work at the smallest scale") {
        auto h = greedy_cycles({"a", "b"}, flat_cost, used, 2, 1);
        REQUIRE(h.has_value());
        CHECK(h->at("a") == std::vector<UserId>{"b"});
        CHECK(h->at("b") == std::vector<UserId>{"a"});
    }
}

TEST_CASE("cycle assignment respects the exclusion record") {
    UsedPeers used;
    used["a"].insert("b");

    // with only two users the sole pairing is spent
    CHECK_FALSE(greedy_cycles({"a", "b"}, flat_cost, used, 2, 1).has_value());

    // a third user restores an assignment that avoids the spent pair
    auto h = greedy_cycles({"a", "b", "c"}, flat_cost, used, 2, 1);
    REQUIRE(h.has_value());
    CHECK(h->at("a") != std::vector<UserId>{"b"});
    for (const auto& [owner, peers] : *h)
        for (const auto& p : peers) CHECK(hiding_edge(used, owner, p));
}

TEST_CASE("a lone user is suppressed outright") {
    auto d = herd({"u"}, 2);
    AnonConfig cfg;
    cfg.seed = 3;
    auto out = anonymize(d, cfg);

    REQUIRE(out.failed.size() == 1);
    CHECK(out.failed[0].first == 1);
    CHECK(out.failed[0].second == std::vector<UserId>{"u"});
    CHECK(out.suppressed.count({"u", 1}) == 1);
    CHECK(out.suppressed.count({"u", 2}) == 1);

    std::size_t boxes = 0;
    for (const auto& [u, r] : out.published.records) boxes += r.size();
    CHECK(boxes == 0);
    CHECK(out.report.suppression_pct == 100.0);
    CHECK(suppression_rate(d, out.suppressed, cfg.epsilon).rate == 1.0);
}

TEST_CASE("pipeline preconditions") {
    AnonConfig cfg;
    CHECK_THROWS_AS(anonymize(Dataset{}, cfg), std::invalid_argument);

    // one epoch of data cannot carry a two-epoch protection window
    auto d = herd({"a", "b"}, 1);
    CHECK_THROWS_WITH(anonymize(d, cfg), ContainsSubstring("fewer epochs"));
}

TEST_CASE("a co-moving herd publishes fully with intact invariants") {
    const std::vector<UserId> users = {"a", "b", "c", "d", "e", "f"};
    auto d = herd(users, 2);
    AnonConfig cfg;
    cfg.seed = 11;
    auto out = anonymize(d, cfg);

    CHECK(out.suppressed.empty());
    CHECK(out.failed.empty());
    REQUIRE(out.rounds.size() == 1);
    CHECK(out.report.valid_rounds == 1);
    CHECK(out.report.failed_rounds == 0);
    CHECK(out.report.suppression_pct == 0.0);
    CHECK(out.report.users == 6);
    CHECK(out.report.epochs == 2);
    CHECK(out.report.records == 6);
    CHECK(out.report.boxes == 12);

    const auto& round = out.rounds[0];
    CHECK(round.anchor == 1);
    REQUIRE(round.members.size() == 6);

    // every member receives one peer and serves exactly once
    std::map<UserId, int> picked;
    for (const auto& u : round.members) {
        const auto& peers = round.hiding.at(u);
        REQUIRE(peers.size() == 1);
        CHECK(peers[0] != u);
        ++picked[peers[0]];
    }
    for (const auto& u : round.members) CHECK(picked[u] == 1);

    for (const auto& u : users) {
        const auto& rec = out.published.records.at(u);
        REQUIRE(rec.size() == 2);
        for (const auto& box : rec)
            CHECK(epoch_of(box.t_min, cfg.epsilon) == epoch_of(box.t_max, cfg.epsilon));

        // own samples land in exactly one cell each
        for (const auto& s : d.trajectories.at(u).samples()) {
            int hits = 0;
            for (const auto& box : rec)
                if (box.contains(s)) ++hits;
            CHECK(hits == 1);
        }
        for (const auto& [e, parts] : out.participants.at(u))
            CHECK(parts.size() <= (std::size_t)cfg.chi());
    }

    auto again = anonymize(d, cfg);
    CHECK(again.published.records == out.published.records);
    CHECK(again.suppressed == out.suppressed);
}

TEST_CASE("peer sets stay disjoint across anchors") {
    const std::vector<UserId> users = {"a", "b", "c", "d", "e", "f"};
    auto d = herd(users, 3);
    AnonConfig cfg;
    cfg.seed = 5;
    auto out = anonymize(d, cfg);

    REQUIRE(out.rounds.size() == 2);
    CHECK(out.suppressed.empty());

    std::map<UserId, std::set<UserId>> all_peers;
    for (const auto& r : out.rounds)
        for (const auto& [owner, peers] : r.hiding)
            for (const auto& p : peers) {
                // an insert that fails is a repeated pairing
                CHECK(all_peers[owner].insert(p).second);
            }

    // epoch 2 is covered by both anchors: owner, anchor-1 peer, anchor-2 peer
    for (const auto& u : users) {
        CHECK(out.participants.at(u).at(2).size() == 3);
        CHECK(out.participants.at(u).at(2).size() <= (std::size_t)cfg.chi());
    }
}

TEST_CASE("an isolated user fails its round and is suppressed") {
    auto d = herd({"a", "b"}, 2, 60, 5, 5);
    merge_samples(d, herd({"d", "e"}, 2, 60, 105, 105));
    merge_samples(d, herd({"zz"}, 2, 60, 10000, 10000));

    AnonConfig cfg;
    cfg.cluster_target = 2;
    cfg.seed = 17;
    auto out = anonymize(d, cfg);

    bool zz_failed = false;
    for (const auto& [anchor, group] : out.failed)
        if (anchor == 1 && group == std::vector<UserId>{"zz"}) zz_failed = true;
    CHECK(zz_failed);
    CHECK(out.suppressed.count({"zz", 1}) == 1);
    CHECK(out.suppressed.count({"zz", 2}) == 1);
    CHECK(out.published.records.count("zz") == 0);

    // the co-located pairs are unaffected
    for (const auto& u : {"a", "b", "d", "e"}) {
        CHECK(out.published.records.at(u).size() == 2);
        CHECK(out.suppressed.count({u, 1}) == 0);
    }
}

TEST_CASE("wider windows anchor several epochs at once") {
    const std::vector<UserId> users = {"a", "b", "c", "d", "e", "f"};
    auto d = herd(users, 3);
    AnonConfig cfg;
    cfg.tau = 120;  // w = 2: one anchor protects three epochs
    cfg.seed = 23;
    auto out = anonymize(d, cfg);

    REQUIRE(out.rounds.size() == 1);
    CHECK(out.rounds[0].anchor == 1);
    CHECK(out.suppressed.empty());
    for (const auto& u : users) {
        REQUIRE(out.published.records.at(u).size() == 3);
        for (const auto& [e, parts] : out.participants.at(u))
            CHECK(parts.size() <= (std::size_t)cfg.chi());
    }
}

TEST_CASE("users missing from the history sit out without being suppressed") {
    const std::vector<UserId> herd_users = {"a", "b", "c", "d", "e"};
    auto d = herd(herd_users, 3);
    // f shows up only from epoch 2 onwards
    merge_samples(d, make_dataset({{"f", 70, 5, 5}, {"f", 130, 5, 5}}));

    AnonConfig cfg;
    cfg.seed = 29;
    auto out = anonymize(d, cfg);

    CHECK(out.suppressed.count({"f", 2}) == 0);
    CHECK(out.suppressed.count({"f", 3}) == 0);
    const auto& rec = out.published.records.at("f");
    REQUIRE(rec.size() == 2);
    for (const auto& box : rec) CHECK(epoch_of(box.t_min, cfg.epsilon) >= 2);
}
