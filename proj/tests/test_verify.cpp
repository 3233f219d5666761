#include <catch2/catch_amalgamated.hpp>

#include <trajanon/anonymize.hpp>
#include <trajanon/verify.hpp>

#include <random>
#include <stdexcept>

using namespace trajanon;

namespace {

/// Two co-located pairs far apart: a,b around the origin, c,d far away.
/// Each user's cells cover exactly its pair, so consistency counts are
/// sharp at k = 2.
struct PairsFixture {
    Dataset raw;
    AnonConfig cfg;
    AnonymizeResult out;

    PairsFixture() {
        std::vector<Sample> s;
        for (int e = 1; e <= 2; ++e) {
            const Coord t = epoch_first_slot(e, 60) + 10;
            for (const auto& u : {"a", "b"}) s.push_back({u, t, 5, 5});
            for (const auto& u : {"c", "d"}) s.push_back({u, t, 1000, 1000});
        }
        raw = make_dataset(s);
        cfg.cluster_target = 2;
        cfg.seed = 13;
        out = anonymize(raw, cfg);
    }
};

}  // namespace

TEST_CASE("record consistency against window knowledge") {
    std::vector<AnonBox> record = {
        {0, 10, 0, 5, 0, 5},
        {20, 30, 10, 15, 10, 15},
    };

    CHECK(consistent(record, {}));
    CHECK(consistent(record, {{"u", 5, 3, 3}}));
    CHECK(consistent(record, {{"u", 5, 3, 3}, {"u", 25, 12, 12}}));
    // sample in a covered slot but outside the box
    CHECK_FALSE(consistent(record, {{"u", 5, 9, 3}}));
    // sample in a time gap no cell covers
    CHECK_FALSE(consistent(record, {{"u", 15, 3, 3}}));
    CHECK_FALSE(consistent({}, {{"u", 5, 3, 3}}));
}

TEST_CASE("shrinking the window never breaks consistency") {
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<Coord> c(0, 30);
    for (int it = 0; it < 200; ++it) {
        std::vector<AnonBox> record;
        Coord t = 0;
        for (int b = 0; b < 3; ++b) {
            Coord lo = t + c(rng) % 5, hi = lo + c(rng) % 5;
            Coord x = c(rng), y = c(rng);
            record.push_back({lo, hi, x, x + 3, y, y + 3});
            t = hi + 1;
        }
        std::vector<Sample> wide;
        for (int i = 0; i < 4; ++i) wide.push_back({"u", c(rng), c(rng), c(rng)});
        std::vector<Sample> narrow(wide.begin(), wide.begin() + 2);
        if (consistent(record, wide)) CHECK(consistent(record, narrow));
    }
}

TEST_CASE("verifying an empty dataset is vacuous") {
    PublishedDataset pub;
    AnonConfig cfg;
    auto rep = verify(Dataset{}, pub, cfg, VerifyMode::exhaustive);
    CHECK(rep.pass());
    CHECK(rep.windows_checked == 0);
}

TEST_CASE("published metadata must agree with the requested parameters") {
    PairsFixture f;
    AnonConfig other = f.cfg;
    other.k = 3;
    CHECK_THROWS_AS(verify(f.raw, f.out.published, other, VerifyMode::exhaustive),
                    std::invalid_argument);
    other = f.cfg;
    other.tau = 120;
    CHECK_THROWS_AS(verify(f.raw, f.out.published, other, VerifyMode::exhaustive),
                    std::invalid_argument);
}

TEST_CASE("faithful output passes exhaustive verification at sharp counts") {
    PairsFixture f;
    auto rep = verify(f.raw, f.out.published, f.cfg, VerifyMode::exhaustive);
    CHECK(rep.pass());
    CHECK(rep.failures.empty());
    CHECK(rep.windows_checked > 0);
    // each pair is covered by exactly its two members' records
    CHECK(rep.min_consistency == 2);
}

TEST_CASE("a box moved off a hider's sample is caught with a witness") {
    PairsFixture f;
    REQUIRE(verify(f.raw, f.out.published, f.cfg, VerifyMode::exhaustive).pass());

    // find the record of a's pair partner covering b's epoch-1 sample
    auto tampered = f.out.published;
    auto& partner_record = tampered.records.at("a");
    REQUIRE(partner_record.front().contains(Sample{"b", 10, 5, 5}));
    partner_record.front().x_min += 100000;
    partner_record.front().x_max += 100000;

    auto rep = verify(f.raw, tampered, f.cfg, VerifyMode::exhaustive);
    CHECK_FALSE(rep.pass());
    REQUIRE_FALSE(rep.failures.empty());
    bool b_witnessed = false;
    for (const auto& w : rep.failures) {
        CHECK(w.consistency < 2);
        if (w.user == "b") b_witnessed = true;
    }
    CHECK(b_witnessed);
    CHECK(rep.render().find("witness") != std::string::npos);
}

TEST_CASE("suppressed users are counted as protected, not failing") {
    std::vector<Sample> s;
    for (int e = 1; e <= 2; ++e) {
        const Coord t = epoch_first_slot(e, 60) + 10;
        for (const auto& u : {"a", "b"}) s.push_back({u, t, 5, 5});
        s.push_back({"zz", t, 99999, 99999});
    }
    auto raw = make_dataset(s);
    AnonConfig cfg;
    cfg.cluster_target = 2;
    cfg.seed = 19;
    auto out = anonymize(raw, cfg);
    REQUIRE(out.suppressed.count({"zz", 1}) == 1);

    auto rep = verify(raw, out.published, cfg, VerifyMode::exhaustive);
    CHECK(rep.pass());
    CHECK(rep.suppression_protected > 0);
}

TEST_CASE("sampled verification is deterministic and bounded") {
    PairsFixture f;
    auto r1 = verify(f.raw, f.out.published, f.cfg, VerifyMode::sampled, 64, 9);
    auto r2 = verify(f.raw, f.out.published, f.cfg, VerifyMode::sampled, 64, 9);
    CHECK(r1.pass());
    CHECK(r1.probes <= 64);
    CHECK(r1.render() == r2.render());
    CHECK(r1.windows_checked == r2.windows_checked);
}

TEST_CASE("hiding configuration counts match exhaustive enumeration") {
    auto c22 = count_hiding_configs(2, 2);
    CHECK(c22.kpick_count == 1);
    CHECK(c22.full_consistency_count == 1);

    auto c42 = count_hiding_configs(4, 2);
    CHECK(c42.kpick_count == 9);
    CHECK(c42.full_consistency_count == 3);

    auto c62 = count_hiding_configs(6, 2);
    CHECK(c62.kpick_count == 265);
    CHECK(c62.full_consistency_count == 15);

    auto c82 = count_hiding_configs(8, 2);
    CHECK(c82.kpick_count == 14833);
    CHECK(c82.full_consistency_count == 105);

    auto c33 = count_hiding_configs(3, 3);
    CHECK(c33.kpick_count == 2);
    CHECK(c33.full_consistency_count == 1);

    auto c63 = count_hiding_configs(6, 3);
    CHECK(c63.kpick_count == 21280);
    CHECK(c63.full_consistency_count == 10);
}

TEST_CASE("free peer choice dominates rigid grouping whenever users exceed k") {
    for (auto [u, k] : {std::pair{4, 2}, {6, 2}, {8, 2}, {6, 3}}) {
        auto c = count_hiding_configs(u, k);
        CHECK(c.kpick_count > c.full_consistency_count);
    }
    auto tight = count_hiding_configs(2, 2);
    CHECK(tight.kpick_count == tight.full_consistency_count);
}

TEST_CASE("configuration counting rejects out-of-range requests") {
    CHECK_THROWS_AS(count_hiding_configs(4, 4), std::invalid_argument);
    CHECK_THROWS_AS(count_hiding_configs(10, 2), std::invalid_argument);
    CHECK_THROWS_AS(count_hiding_configs(2, 3), std::invalid_argument);
    CHECK_THROWS_AS(count_hiding_configs(5, 2), std::invalid_argument);
    CHECK_THROWS_AS(count_hiding_configs(4, 3), std::invalid_argument);
}
