#include "mannfix/sampling.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numeric>
#include <random>

using namespace mannfix;

namespace {

Action act(double reward, std::vector<Transition> t = {}) { return Action{reward, std::move(t)}; }

std::uint64_t total_count(const SamplerState& st) {
    std::uint64_t sum = 0;
    for (const auto& p : st.pairs) sum += p.total;
    return sum;
}

} // namespace

TEST_CASE("structural prior") {
    const Ssg g({State{Player::Max, {act(1.0, {{1, 0.4}, {0, 0.6}}), act(0.0, {{1, 0.3}})}},
                 State{Player::Min, {act(2.0)}}, State{Player::Min, {}}});
    const StructuralPrior prior(g);
    REQUIRE(prior.pair_count() == 3);
    CHECK(prior.pair(0).support == std::vector<std::size_t>{0, 1});
    CHECK_FALSE(prior.pair(0).terminating);
    CHECK(prior.pair(0).reward_positive);
    CHECK(prior.pair(1).terminating);
    CHECK_FALSE(prior.pair(1).reward_positive);
    CHECK(prior.pair(2).support.empty());
    CHECK(prior.pair(2).terminating);
    CHECK(prior.action_count(2) == 0);
}

TEST_CASE("single observations") {
    const Ssg g({State{Player::Max, {act(1.0, {{1, 1.0}}), act(3.0)}}, State{Player::Min, {act(0.0, {{0, 1.0}})}}});
    const StructuralPrior prior(g);
    auto st = SamplerState::initial(prior);
    Rng rng(1);
    for (int i = 0; i < 50; ++i) observe_step(st, prior, g, 0, 0, rng);
    CHECK(st.pairs[0].successor == std::vector<std::uint64_t>{50});
    CHECK(st.pairs[0].termination == 0);
    CHECK(st.pairs[0].reward == 1.0);
    CHECK(st.pairs[0].reward_observed);

    for (int i = 0; i < 20; ++i) observe_step(st, prior, g, 0, 1, rng);
    CHECK(st.pairs[1].termination == 20);
    CHECK(st.pairs[1].total == 20);

    CHECK_THROWS_AS(observe_step(st, prior, g, 1, 1, rng), std::out_of_range);
}

TEST_CASE("observations are deterministic per seed") {
    std::mt19937_64 gen(9);
    const Ssg g = oracle::random_game(gen);
    const StructuralPrior prior(g);
    if (prior.pair_count() == 0) return;
    auto a = SamplerState::initial(prior), b = SamplerState::initial(prior);
    Rng r1(77), r2(77);
    batch_observe(a, prior, g, 500, r1);
    batch_observe(b, prior, g, 500, r2);
    for (std::size_t i = 0; i < prior.pair_count(); ++i) {
        CHECK(a.pairs[i].successor == b.pairs[i].successor);
        CHECK(a.pairs[i].termination == b.pairs[i].termination);
    }
}

TEST_CASE("batch observation counts") {
    std::mt19937_64 gen(10);
    const Ssg g({State{Player::Max, {act(1.0, {{1, 0.5}}), act(0.0, {{0, 1.0}})}},
                 State{Player::Min, {act(0.2, {{0, 0.5}, {1, 0.5}})}}});
    const StructuralPrior prior(g);
    auto st = SamplerState::initial(prior);
    Rng rng(3);
    batch_observe(st, prior, g, 0, rng);
    CHECK(total_count(st) == 0);
    batch_observe(st, prior, g, 1, rng);
    CHECK(total_count(st) == 1);
    batch_observe(st, prior, g, 30, rng);
    CHECK(total_count(st) == 31);
    CHECK(st.steps == 31);
    for (const auto& p : st.pairs)
        CHECK(p.total == p.termination + std::accumulate(p.successor.begin(), p.successor.end(), std::uint64_t{0}));

    const Ssg empty({State{Player::Max, {}}});
    const StructuralPrior none(empty);
    auto st2 = SamplerState::initial(none);
    CHECK_THROWS(batch_observe(st2, none, empty, 1, rng));
}

TEST_CASE("empirical model") {
    SUBCASE("unobserved sure singleton supports are kept with probability one") {
        const Ssg g({State{Player::Max, {act(1.0, {{1, 1.0}})}}, State{Player::Min, {act(0.0, {{0, 1.0}})}}});
        const StructuralPrior prior(g);
        const Ssg e = empirical_ssg(SamplerState::initial(prior), prior);
        CHECK(e.action(0, 0).transitions[0].prob == 1.0);
        CHECK(e.action(1, 0).transitions[0].prob == 1.0);
        CHECK(e.action(0, 0).reward == 0.0);
    }
    SUBCASE("unobserved terminating pairs leave a termination share") {
        const Ssg g({State{Player::Max, {act(1.0, {{0, 0.3}, {1, 0.3}})}}, State{Player::Min, {}}});
        const StructuralPrior prior(g);
        const auto t = empirical_transitions(SamplerState::initial(prior).pairs[0], prior.pair(0));
        REQUIRE(t.size() == 2);
        CHECK(t[0].prob == doctest::Approx(1.0 / 3.0));
        CHECK(t[1].prob == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("relative frequencies") {
        const Ssg g({State{Player::Max, {act(1.0, {{0, 0.5}})}}});
        const StructuralPrior prior(g);
        auto st = SamplerState::initial(prior);
        st.pairs[0].successor = {3};
        st.pairs[0].termination = 1;
        st.pairs[0].total = 4;
        const Ssg e = empirical_ssg(st, prior);
        CHECK(e.action(0, 0).transitions[0].prob == 0.75);
        CHECK(e.action(0, 0).mass() == 0.75);
    }
    SUBCASE("non-terminating pairs have mass exactly one") {
        const Ssg g({State{Player::Max, {act(1.0, {{0, 0.1}, {1, 0.2}, {2, 0.7}})}}, State{}, State{}});
        const StructuralPrior prior(g);
        auto st = SamplerState::initial(prior);
        Rng rng(2);
        for (int i = 0; i < 1000; ++i) {
            observe_step(st, prior, g, 0, 0, rng);
            const auto t = empirical_transitions(st.pairs[0], prior.pair(0));
            double mass = 0.0;
            for (const auto& x : t) mass += x.prob;
            REQUIRE(mass == doctest::Approx(1.0).epsilon(1e-15));
        }
        CHECK(st.pairs[0].termination == 0);
    }
    SUBCASE("reward noise hook") {
        const Ssg g({State{Player::Max, {act(1.0, {{0, 0.5}}), act(0.0)}}});
        const StructuralPrior prior(g);
        auto st = SamplerState::initial(prior);
        Rng rng(2);
        int calls = 0;
        const RewardNoise noise = [&](double r, Rng&) {
            ++calls;
            return r + 0.5;
        };
        for (int i = 0; i < 10; ++i) {
            observe_step(st, prior, g, 0, 0, rng, noise);
            observe_step(st, prior, g, 0, 1, rng, noise);
        }
        CHECK(calls == 1);
        CHECK(empirical_reward(st.pairs[0], prior.pair(0)) == 1.5);
        CHECK(empirical_reward(st.pairs[1], prior.pair(1)) == 0.0);
    }
}

TEST_CASE("validity check catches hand-built violations") {
    const Ssg truth({State{Player::Max, {act(1.0, {{0, 1.0}}), act(0.0, {{0, 0.5}})}}, State{Player::Min, {}}});
    const StructuralPrior prior(truth);
    CHECK(sampling_validity_check(empirical_ssg(SamplerState::initial(prior), prior), prior, truth).empty());

    const Ssg off_support({State{Player::Max, {act(1.0, {{0, 0.5}, {1, 0.5}}), act(0.0, {{0, 0.5}})}},
                           State{Player::Min, {}}});
    CHECK(sampling_validity_check(off_support, prior, truth).size() == 1);

    const Ssg leaking({State{Player::Max, {act(1.0, {{0, 0.9}}), act(0.0, {{0, 0.5}})}}, State{Player::Min, {}}});
    CHECK(sampling_validity_check(leaking, prior, truth).size() == 1);

    const Ssg rewarded({State{Player::Max, {act(1.0, {{0, 1.0}}), act(0.7, {{0, 0.5}})}}, State{Player::Min, {}}});
    CHECK(sampling_validity_check(rewarded, prior, truth).size() == 1);

    const Ssg reshaped({State{Player::Max, {act(1.0, {{0, 1.0}})}}, State{Player::Min, {}}});
    CHECK_FALSE(sampling_validity_check(reshaped, prior, truth).empty());
}

TEST_CASE("fuzzed samplings are always valid") {
    std::mt19937_64 gen(2718);
    std::uniform_int_distribution<std::size_t> counts(0, 300);
    oracle::RandomGameOptions opts;
    opts.zero_reward_probability = 0.4;
    for (int trial = 0; trial < 300; ++trial) {
        const Ssg truth = oracle::random_game(gen, opts);
        const StructuralPrior prior(truth);
        if (prior.pair_count() == 0) continue;
        auto st = SamplerState::initial(prior);
        Rng rng(gen());
        const auto k = counts(gen);
        for (std::size_t i = 0; i < k; ++i) {
            batch_observe(st, prior, truth, 1, rng);
            if (i % 37 == 0) REQUIRE(sampling_validity_check(empirical_ssg(st, prior), prior, truth).empty());
        }
        CHECK(sampling_validity_check(empirical_ssg(st, prior), prior, truth).empty());
        CHECK(total_count(st) == k);
    }
}

TEST_CASE("cached sampler operator matches the rebuilt model") {
    std::mt19937_64 gen(31);
    for (int trial = 0; trial < 40; ++trial) {
        const Ssg truth = oracle::random_game(gen);
        Sampler sampler(truth);
        if (sampler.prior().pair_count() == 0) continue;
        Rng rng(trial);
        std::uniform_real_distribution<double> unit(0.0, 3.0);
        for (int round = 0; round < 20; ++round) {
            sampler.batch_observe(7, rng);
            ValueVector x(truth.size());
            for (auto& v : x) v = unit(gen);
            const auto expected = bellman_apply(sampler.empirical_ssg(), x);
            REQUIRE(sampler.empirical_bellman_apply(x) == expected);
            for (std::size_t s = 0; s < truth.size(); ++s)
                REQUIRE(sampler.empirical_bellman_component(x, s) == expected[s]);
        }
    }
}

TEST_CASE("counts sidecar round trip") {
    std::mt19937_64 gen(5);
    const Ssg truth = oracle::random_game(gen, {2, 5, 3});
    Sampler a(truth);
    Rng rng(1);
    a.batch_observe(200, rng);
    Sampler b(truth);
    b.load_counts_json(a.counts_to_json());
    CHECK(b.state().steps == a.state().steps);
    const ValueVector x(truth.size(), 1.0);
    CHECK(b.empirical_bellman_apply(x) == a.empirical_bellman_apply(x));
    CHECK_THROWS(b.load_counts_json("{\"pairs\": []}"));
    CHECK_THROWS(b.load_counts_json("nope"));
}

TEST_CASE("empirical transitions converge") {
    std::mt19937_64 gen(8080);
    std::size_t good = 0, total = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Ssg truth = oracle::random_game(gen);
        const StructuralPrior prior(truth);
        if (prior.pair_count() == 0) continue;
        auto st = SamplerState::initial(prior);
        Rng rng(gen());
        for (std::size_t i = 0; i < prior.pair_count(); ++i) {
            const auto [s, a] = prior.index().pair(i);
            for (int k = 0; k < 10000; ++k) observe_step(st, prior, truth, s, a, rng);
        }
        const Ssg e = empirical_ssg(st, prior);
        double worst = 0.0;
        for (std::size_t s = 0; s < truth.size(); ++s)
            for (std::size_t a = 0; a < truth.action_count(s); ++a) {
                const auto& t = truth.action(s, a).transitions;
                const auto& u = e.action(s, a).transitions;
                for (const auto& x : t) {
                    double p = 0.0;
                    for (const auto& y : u)
                        if (y.target == x.target) p = y.prob;
                    worst = std::max(worst, std::abs(p - x.prob));
                }
                worst = std::max(worst, std::abs(e.action(s, a).reward - truth.action(s, a).reward));
            }
        ++total;
        good += worst <= 0.05;
    }
    CHECK(good == total);
}
