#include <doctest.h>

#include <cmath>
#include <vector>

#include "nudgerl/advantage.hpp"
#include "nudgerl/common.hpp"
#include "nudgerl/rng.hpp"
#include "test_util.hpp"

using namespace nudgerl;

TEST_SUITE_BEGIN("advantage");

namespace {

Eigen::VectorXd vec(std::initializer_list<double> vals) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
    Eigen::Index i = 0;
    for (double x : vals) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("grpo: zero variance gives zero advantages") {
    const auto adv = grpo_advantage(vec({1, 1, 1, 1}), 1e-4);
    for (int i = 0; i < 4; ++i) CHECK(adv.normalized[i] == 0.0);
    CHECK(adv.stats.std_a == 0.0);
}

TEST_CASE("grpo: balanced group approaches +-1 as delta vanishes") {
    const auto adv = grpo_advantage(vec({1, 1, 0, 0}), 1e-12);
    CHECK(adv.normalized[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv.normalized[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(adv.normalized[2] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(adv.normalized[3] == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("grpo: lone success with vanishing delta") {
    // mean 0.25, centered [0.75, -0.25, -0.25, -0.25], population std
    // sqrt(3/16); normalized first entry 0.75 / sqrt(3/16) = sqrt(3).
    const auto adv = grpo_advantage(vec({1, 0, 0, 0}), 1e-12);
    const double expected = 0.75 / std::sqrt(3.0 / 16.0);
    CHECK(adv.normalized[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(1.7321).epsilon(1e-4));
}

TEST_CASE("grpo rejects undersized groups") {
    CHECK_THROWS_AS(grpo_advantage(vec({1}), 1e-4), DomainError);
}

TEST_CASE("inter-intra worked example") {
    // rewards [1,0,1,1], contexts [A,A,B,B], lambda 1.1:
    // rbar_A = 0.5, rbar_B = 1.0, rbar = 0.75
    //   A_0 = (1-0.5) + 1.1*(0.5-0.75)  = 0.225
    //   A_1 = (0-0.5) + 1.1*(0.5-0.75)  = -0.775
    //   A_2 = A_3 = (1-1) + 1.1*(1-0.75) = 0.275
    const auto adv = inter_intra_advantage(vec({1, 0, 1, 1}), {0, 0, 1, 1}, 1.1, 1e-4);
    CHECK(adv.pre_norm[0] == doctest::Approx(0.225).epsilon(1e-12));
    CHECK(adv.pre_norm[1] == doctest::Approx(-0.775).epsilon(1e-12));
    CHECK(adv.pre_norm[2] == doctest::Approx(0.275).epsilon(1e-12));
    CHECK(adv.pre_norm[3] == doctest::Approx(0.275).epsilon(1e-12));

    CHECK(adv.stats.reward_mean == doctest::Approx(0.75));
    REQUIRE(adv.stats.context_means.size() == 2);
    CHECK(adv.stats.context_means[0].second == doctest::Approx(0.5));
    CHECK(adv.stats.context_means[1].second == doctest::Approx(1.0));
}

TEST_CASE("normalization invariants") {
    RngStream rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + rng.uniform_int(15);
        Eigen::VectorXd rewards(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            rewards[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            labels[i] = rng.uniform_int(4) - 1;
        }
        const double lambda = 2.0 * rng.u01();
        const auto adv = inter_intra_advantage(rewards, labels, lambda, 1e-4);

        CHECK(std::abs(adv.normalized.mean()) < 1e-12);
        const double std_norm =
            std::sqrt((adv.normalized.array() - adv.normalized.mean()).square().mean());
        const double expected = adv.stats.std_a / (adv.stats.std_a + adv.stats.delta);
        CHECK(std::abs(std_norm - expected) < 1e-12);
        CHECK(std_norm <= 1.0 + 1e-12);

        // Normalization is the stated affine map, elementwise.
        for (int i = 0; i < n; ++i) {
            const double expect =
                (adv.pre_norm[i] - adv.stats.mean_a) / (adv.stats.std_a + adv.stats.delta);
            CHECK(adv.normalized[i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("lambda = 1 telescopes to the plain group advantage") {
    RngStream rng(5);
    for (int trial = 0; trial < 2000; ++trial) {
        const int n = 2 + rng.uniform_int(10);
        Eigen::VectorXd rewards(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            rewards[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
            labels[i] = rng.uniform_int(4) - 1;
        }
        const auto ii = inter_intra_advantage(rewards, labels, 1.0, 1e-4);
        const auto plain = grpo_advantage(rewards, 1e-4);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(ii.pre_norm[i] - plain.pre_norm[i]) < 1e-12);
            CHECK(std::abs(ii.normalized[i] - plain.normalized[i]) < 1e-12);
        }
    }
}

TEST_CASE("all-empty groups reduce to grpo exactly") {
    RngStream rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 + rng.uniform_int(10);
        Eigen::VectorXd rewards(n);
        for (int i = 0; i < n; ++i) rewards[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
        const auto ii =
            inter_intra_advantage(rewards, std::vector<int>(n, -1), 1.7, 1e-4);
        const auto plain = grpo_advantage(rewards, 1e-4);
        CHECK(bitwise_eq(ii.pre_norm, plain.pre_norm));
        CHECK(bitwise_eq(ii.normalized, plain.normalized));
    }
}

TEST_CASE("all-equal rewards give a zero vector") {
    const auto adv = inter_intra_advantage(vec({1, 1, 1, 1}), {0, 0, 1, -1}, 1.1, 1e-4);
    for (int i = 0; i < 4; ++i) CHECK(adv.normalized[i] == 0.0);
}

TEST_CASE("singleton context groups use the formula verbatim") {
    // Context A holds one reward-1 rollout: rbar_A = 1, so the intra term
    // vanishes and A_0 = lambda * (1 - rbar).
    const double lambda = 1.5;
    const auto adv = inter_intra_advantage(vec({1, 0, 0}), {0, 1, 1}, lambda, 1e-4);
    const double rbar = 1.0 / 3.0;
    CHECK(adv.pre_norm[0] == doctest::Approx(lambda * (1.0 - rbar)).epsilon(1e-12));
}

TEST_CASE("check_ordering on the worked example") {
    CHECK(check_ordering(vec({1, 0, 1, 1}), {0, 0, 1, 1}, 1.1));
    CHECK(check_ordering(vec({1, 0, 1, 1}), {0, 0, 1, 1}, 0.0));
    CHECK(check_ordering(vec({1, 0, 1, 1}), {0, 0, 1, 1}, 2.0));
}

TEST_CASE("randomized ordering spot check inside the certified range") {
    RngStream rng(11);
    for (int trial = 0; trial < 20000; ++trial) {
        const int n = 2 + rng.uniform_int(15);
        Eigen::VectorXd rewards(n);
        std::vector<int> labels(n);
        for (int i = 0; i < n; ++i) {
            rewards[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            labels[i] = rng.uniform_int(5) - 1;
        }
        const double lambda = 2.0 * rng.u01();
        if (!check_ordering(rewards, labels, lambda)) {
            CAPTURE(lambda);
            FAIL("ordering violated inside [0,2]");
        }
    }
}

TEST_CASE("a counterexample exists at lambda = 2.5") {
    // Structured search: reward-1 rollout alone in a low-mean context vs a
    // reward-0 rollout in a high-mean context.
    const double lambda = 2.5;
    bool found = false;
    for (int a = 2; a <= 8 && !found; ++a) {
        for (int b = 2; b <= 8 && !found; ++b) {
            const int n = a + b;
            Eigen::VectorXd rewards(n);
            std::vector<int> labels(n);
            for (int i = 0; i < a; ++i) {
                rewards[i] = i == 0 ? 1.0 : 0.0;
                labels[i] = 0;
            }
            for (int i = 0; i < b; ++i) {
                rewards[a + i] = i == 0 ? 0.0 : 1.0;
                labels[a + i] = 1;
            }
            if (!check_ordering(rewards, labels, lambda)) found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("equal-reward successes prefer contexts according to lambda") {
    // Two reward-1 rollouts: one in a context with higher mean reward. With
    // lambda > 1 it gets the larger advantage, with lambda < 1 the smaller.
    const Eigen::VectorXd rewards = vec({1, 1, 1, 0});
    const std::vector<int> labels = {0, 0, 1, 1};  // rbar_0 = 1 > rbar_1 = 0.5

    const auto high = inter_intra_advantage(rewards, labels, 1.5, 1e-4);
    CHECK(high.pre_norm[0] > high.pre_norm[2]);

    const auto low = inter_intra_advantage(rewards, labels, 0.5, 1e-4);
    CHECK(low.pre_norm[0] < low.pre_norm[2]);

    const auto neutral = inter_intra_advantage(rewards, labels, 1.0, 1e-4);
    CHECK(neutral.pre_norm[0] == doctest::Approx(neutral.pre_norm[2]).epsilon(1e-12));
}

TEST_SUITE_END();
