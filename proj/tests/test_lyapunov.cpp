#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "vrmcast/lyapunov.hpp"

using namespace vrmcast;
using namespace vrmcast::lyapunov;

TEST_CASE("MTP slack") {
    CHECK(mtp_slack(1, 1, 10.0, 0.25) == doctest::Approx(10.0));
    CHECK(mtp_slack(1, 40, 10.0, 0.25) == doctest::Approx(0.25));
    CHECK(mtp_slack(1, 41, 10.0, 0.25) == 0.0);
    CHECK(mtp_slack(1, 500, 10.0, 0.25) == 0.0);
}

TEST_CASE("auxiliary selection and admission solve their subproblems") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 2e8);
    const double a_max = 2 * 10 * 0.972e6, v = 1e8;
    for (int i = 0; i < 2000; ++i) {
        const double z = u(rng), q = u(rng), sf = u(rng) * 0.1;
        const double g = select_auxiliary(z, v, a_max);
        CHECK(v * g - z * g == oracle::osp1_best(z, v, a_max));
        const double alpha = alpha_weight(q, sf, 0.01, i % 2).total;
        const int a = admit(z, alpha);
        CHECK((z - alpha) * a * 1e6 == oracle::osp2_best(z, alpha, 1e6));
    }
    CHECK(select_auxiliary(v, v, a_max) == a_max);  // tie goes to admitting
    CHECK(admit(5.0, 5.0) == 1);
}

TEST_CASE("alpha weight") {
    const auto a = alpha_weight(100.0, 20.0, 0.01, false);
    CHECK(a.q == doctest::Approx(100.0 * 1.0001 - 0.2));
    CHECK(a.f == doctest::Approx(20.0 + 0.98 * 100.0));
    CHECK(a.total == a.q);
    const auto b = alpha_weight(100.0, 20.0, 0.01, true);
    // appendix form: ((I - eps) Q + sum F)(I - eps) + Q
    CHECK(b.total == doctest::Approx((0.99 * 100.0 + 20.0) * 0.99 + 100.0));
}

TEST_CASE("admitted bits") {
    TileSet real(10), pred(10);
    real.insert(1);
    real.insert(2);
    pred.insert(5);
    CHECK(admitted_bits(1, 1, real, pred, 1e6) == 3e6);
    CHECK(admitted_bits(1, 0, real, pred, 1e6) == 2e6);
    CHECK(admitted_bits(0, 0, real, pred, 1e6) == 0.0);
}

TEST_CASE("queue updates") {
    UserQueueState s;
    s.q = 10;
    s.z = 5;
    SlotDecision d;
    d.served = 4;
    d.dropped = 1;
    d.admitted = 3;
    d.gamma = 7;
    d.violated = true;
    d.current_frame = 2;
    d.delay_queue_enabled = true;
    const auto n = update_queues(s, d, 0.01);
    CHECK(n.q == 8);
    CHECK(n.z == 9);
    CHECK(n.f.at(2) == doctest::Approx(0.99 * 8));

    d.served = 50;
    d.violated = false;
    const auto m = update_queues(s, d, 0.01);
    CHECK(m.q == 3);
    CHECK(m.f.at(2) == 0.0);  // clipped

    d.delay_queue_enabled = false;
    CHECK(update_queues(s, d, 0.01).f.empty());
    d.served = -1;
    CHECK_THROWS_AS(update_queues(s, d, 0.01), std::invalid_argument);
}

TEST_CASE("drift bound check agrees with the term-by-term oracle") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<UserQueueState> before(3), after(3);
        std::vector<SlotDecision> dec(3);
        std::vector<oracle::Slot> slots;
        for (int k = 0; k < 3; ++k) {
            auto& b = before[static_cast<std::size_t>(k)];
            b.q = 1e7 * u(rng);
            b.z = 2e8 * u(rng);
            b.f[4] = 1e6 * u(rng);
            auto& d = dec[static_cast<std::size_t>(k)];
            d.served = b.q * u(rng) * 0.5;
            d.dropped = (b.q - d.served) * u(rng) * 0.5;
            d.admitted = u(rng) < 0.5 ? 2e7 * u(rng) : 0.0;
            d.gamma = select_auxiliary(b.z, 1e8, 2e7);
            d.violated = u(rng) < 0.3;
            d.current_frame = 4;
            d.delay_queue_enabled = true;
            after[static_cast<std::size_t>(k)] = update_queues(b, d, 0.01);
            const auto& a = after[static_cast<std::size_t>(k)];
            slots.push_back({b.q, b.z, b.sum_f(), a.q, a.z, a.f.at(4) * a.f.at(4), b.f.at(4) * b.f.at(4),
                             d.served + d.dropped, d.admitted, d.gamma, d.violated});
        }
        const auto got = drift_bound_check(before, dec, after, 1e8, 0.01);
        const auto want = oracle::drift_bound(slots, 1e8, 0.01);
        CHECK(got.holds);
        CHECK(oracle::holds(want));
        CHECK(std::abs(double(got.rhs - want.rhs)) <= 1e-9 * double(want.scale));
        CHECK(std::abs(double(got.lhs - want.lhs)) <= 1e-9 * double(want.scale));
    }
}
