#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vrmcast/channel.hpp"
#include "vrmcast/matching.hpp"

using namespace vrmcast;
using namespace vrmcast::matching;

TEST_CASE("interference estimate") {
    CHECK(estimate_interference(9.0, {}, 0.5) == 0.0);
    CHECK(estimate_interference(4.0, {1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(0.5 * 4.0 + 0.5 * 2.5));
    InterferenceEstimator e(2, 0.25, 3);
    CHECK(e.estimate(0) == 0.0);
    for (double x : {10.0, 20.0, 30.0, 40.0}) e.record(0, x);
    CHECK(e.samples(0) == 3);
    CHECK(e.estimate(0) == doctest::Approx(0.25 * 40.0 + 0.75 * 30.0));
    CHECK(e.estimate(1) == 0.0);
    CHECK_THROWS_AS(InterferenceEstimator(1, 1.5, 3), std::invalid_argument);
    CHECK_THROWS_AS(InterferenceEstimator(1, 0.5, 0), std::invalid_argument);
}

TEST_CASE("beam grouping") {
    const std::vector<double> cat{5, 10, 15, 20, 25, 30, 35, 40, 45};
    SUBCASE("one beam when it fits") {
        const auto b = group_beams({10, 14, 18}, cat, 4);
        CHECK(b.size() == 3);  // one per member while chains allow
        const auto one = group_beams({10, 14, 18}, cat, 1);
        REQUIRE(one.size() == 1);
        CHECK(one[0].width_deg == 10);
        CHECK(one[0].boresight_deg == doctest::Approx(14));
        CHECK(one[0].members == std::vector<int>{0, 1, 2});
    }
    SUBCASE("wraps across +-180") {
        const auto b = group_beams({175, -178, 0}, cat, 2);
        REQUIRE(b.size() == 2);
        bool found = false;
        for (const auto& beam : b)
            if (beam.members == std::vector<int>{0, 1}) {
                found = true;
                CHECK(beam.width_deg == 10);
                CHECK(channel::abs_angle_diff_deg(beam.boresight_deg, 178.5) < 1e-9);
            }
        CHECK(found);
    }
    SUBCASE("too wide for the catalog uses the widest beam") {
        const auto b = group_beams({0, 90}, cat, 1);
        CHECK(b[0].width_deg == 45);
    }
    SUBCASE("every member covered once, spread within width") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(-180, 180);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> az(1 + trial % 9);
            for (double& a : az) a = u(rng) * 0.2;
            const auto beams = group_beams(az, cat, 4);
            CHECK(beams.size() == std::min<std::size_t>(4, az.size()));
            std::vector<int> seen(az.size(), 0);
            for (const auto& b : beams)
                for (int m : b.members) {
                    ++seen[static_cast<std::size_t>(m)];
                    if (b.width_deg < 45)
                        CHECK(channel::abs_angle_diff_deg(az[static_cast<std::size_t>(m)], b.boresight_deg) <=
                              b.width_deg / 2 + 1e-9);
                }
            CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
        }
    }
    CHECK(group_beams({}, cat, 4).empty());
    CHECK_THROWS_AS(group_beams({1.0}, {}, 4), std::invalid_argument);
}

TEST_CASE("beam gain") {
    Beam b{{0}, 10.0, 170.0};
    const double main = channel::antenna_gain(channel::deg_to_rad(10.0), 0.0, 0.05);
    CHECK(beam_gain(b, 175.0, 0.05) == main);
    CHECK(beam_gain(b, -178.0, 0.05) == 0.05);
    CHECK(beam_gain(b, -176.0, 0.05) == 0.05);
    CHECK(beam_gain(b, 165.0, 0.05) == main);
}

TEST_CASE("deferred acceptance") {
    SUBCASE("hand-worked instance") {
        // both SBSs want cluster 0; cluster 0 prefers SBS 1
        UtilityTables u{Eigen::MatrixXd(2, 2), Eigen::MatrixXd(2, 2), {true, true}};
        u.sbs_side << 5, 1,
                      5, 1;
        u.cluster_side << 2, 7,
                          3, 4;
        std::mt19937_64 rng(1);
        const auto m = deferred_acceptance(u, rng);
        CHECK(m.cluster_of_sbs == std::vector<int>{1, 0});
        CHECK(m.sbs_of_cluster == std::vector<int>{1, 0});
        CHECK(is_stable(m, u));
        CHECK(m.proposals <= 4);

        auto bad = m;
        std::swap(bad.cluster_of_sbs[0], bad.cluster_of_sbs[1]);
        std::swap(bad.sbs_of_cluster[0], bad.sbs_of_cluster[1]);
        CHECK(!is_stable(bad, u));
        CHECK(oracle::blocking_pairs(bad, u) > 0);
    }
    SUBCASE("ineligible clusters stay idle") {
        UtilityTables u{Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(2, 3), {false, true, false}};
        std::mt19937_64 rng(1);
        const auto m = deferred_acceptance(u, rng);
        CHECK(m.sbs_of_cluster[0] == -1);
        CHECK(m.sbs_of_cluster[2] == -1);
        CHECK(m.sbs_of_cluster[1] >= 0);
    }
    SUBCASE("random instances are stable") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u01(0, 1);
        for (int trial = 0; trial < 300; ++trial) {
            const int nb = 1 + trial % 6, nk = 1 + (trial / 6) % 8;
            UtilityTables u{Eigen::MatrixXd(nb, nk), Eigen::MatrixXd(nb, nk), std::vector<bool>(static_cast<std::size_t>(nk))};
            for (int k = 0; k < nk; ++k) u.eligible[static_cast<std::size_t>(k)] = u01(rng) < 0.8;
            for (int b = 0; b < nb; ++b)
                for (int k = 0; k < nk; ++k) {
                    u.sbs_side(b, k) = std::floor(u01(rng) * 4);  // ties on purpose
                    u.cluster_side(b, k) = u01(rng);
                }
            const auto m = deferred_acceptance(u, rng);
            CHECK(oracle::blocking_pairs(m, u) == 0);
            CHECK(is_stable(m, u));
            CHECK(m.proposals <= nb * nk);
        }
    }
    UtilityTables mismatched{Eigen::MatrixXd(2, 2), Eigen::MatrixXd(1, 2), {true, true}};
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(deferred_acceptance(mismatched, rng), std::invalid_argument);
}

TEST_CASE("slot settlement") {
    // rates in bits/s; slot 1 s for easy arithmetic
    const std::vector<double> rate{100.0, 50.0, 200.0};
    std::vector<PoolChunk> pool{
        {1, 0, 3.0, {0, 1}, {40.0, 40.0}},   // multicast at min(100, 50) = 50 -> 0.8 s
        {1, 1, 2.0, {2}, {100.0}},           // 0.2 s left at 200 -> 40 bits
        {1, 2, 1.0, {0}, {10.0}},            // no time left
    };
    const auto s = settle_slot(pool, rate, 1.0);
    REQUIRE(s.size() == 2);
    CHECK(s[0].entry == 0);
    CHECK(s[0].bits == doctest::Approx(40.0));
    CHECK(s[1].entry == 1);
    CHECK(s[1].bits == doctest::Approx(40.0));

    // a requester already done does not hold back the rate
    std::vector<PoolChunk> p2{{1, 0, 1.0, {0, 1}, {30.0, 0.0}}};
    const auto s2 = settle_slot(p2, rate, 1.0);
    REQUIRE(s2.size() == 1);
    CHECK(s2[0].bits == doctest::Approx(30.0));
    CHECK(settle_slot({}, rate, 1.0).empty());
}
