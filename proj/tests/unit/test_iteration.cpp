#include "mannfix/iteration.hpp"
#include "mannfix/ssg.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace mannfix;

namespace {

OperatorProvider halving() {
    return OperatorProvider::constant([](const ValueVector& x) { return ValueVector{x[0] / 2}; }, ZeroBox{{1.0}});
}

OperatorProvider weighted_example() {
    return OperatorProvider(ZeroBox{{1.0}}, [](std::size_t n, const ValueVector& x) {
        const double inv = 1.0 / static_cast<double>(n + 1);
        return ValueVector{(1 - inv) * x[0] + inv};
    });
}

StoppingRule steps(std::size_t n) {
    StoppingRule s;
    s.max_steps = n;
    return s;
}

} // namespace

TEST_CASE("mann_step examples") {
    CHECK(mann_step({1.0}, {1.0}, {0.5}, {0.0}) == ValueVector{1.0});
    const auto kleene_like = mann_step({1, 1}, {0, 0}, {1 - 1e-9, 1 - 1e-9}, {0, 0});
    CHECK(kleene_like[0] == doctest::Approx(1e-9).epsilon(1e-6));
    CHECK(kleene_like[1] == kleene_like[0]);
    CHECK(mann_step({1.0}, {0.0}, {0.5}, {0.5}) == ValueVector{0.25});
    CHECK_THROWS_AS(mann_step({1.0, 2.0}, {1.0}, {0.5}, {0.5}), DimensionMismatch);
    CHECK_THROWS_AS(mann_step({1.0}, {1.0}, {0.5, 0.5}, {0.5}), DimensionMismatch);
}

TEST_CASE("mann_step preserves the box, order and distances") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const ValueVector bound{1.0, 2.0, 5.0};
    for (int trial = 0; trial < 2000; ++trial) {
        ValueVector x(3), fx(3), a(3), b(3);
        for (std::size_t i = 0; i < 3; ++i) {
            x[i] = unit(rng) * bound[i];
            fx[i] = unit(rng) * bound[i];
            a[i] = unit(rng);
            b[i] = unit(rng);
        }
        const auto y = mann_step(x, fx, a, b);
        CHECK(ZeroBox{bound}.contains(y));
    }
}

TEST_CASE("update map through Bellman operators is monotone and non-expansive") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int g = 0; g < 50; ++g) {
        const Ssg game = oracle::random_game(rng);
        const std::size_t d = game.size();
        for (int t = 0; t < 20; ++t) {
            ValueVector x(d), y(d), a(d), b(d);
            for (std::size_t i = 0; i < d; ++i) {
                x[i] = 5 * unit(rng);
                y[i] = 5 * unit(rng);
                a[i] = unit(rng);
                b[i] = unit(rng);
            }
            ValueVector lo(d), hi(d);
            for (std::size_t i = 0; i < d; ++i) {
                lo[i] = std::min(x[i], y[i]);
                hi[i] = std::max(x[i], y[i]);
            }
            const auto slo = mann_step(lo, bellman_apply(game, lo), a, b);
            const auto shi = mann_step(hi, bellman_apply(game, hi), a, b);
            for (std::size_t i = 0; i < d; ++i) CHECK(slo[i] <= shi[i] + 1e-12);

            const auto sx = mann_step(x, bellman_apply(game, x), a, b);
            const auto sy = mann_step(y, bellman_apply(game, y), a, b);
            CHECK(sup_distance(sx, sy) <= sup_distance(x, y) + 1e-12);
        }
    }
}

TEST_CASE("halving operator under S2") {
    const auto t = iterate(halving(), table_scheme(2), {1.0}, steps(10), ValueVector{0.0});
    REQUIRE(t.size() == 11);
    CHECK(t.errors[0] == 1.0);
    CHECK(t.errors[1] < 1e-3);
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t.errors[k] <= t.errors[k - 1]);
}

TEST_CASE("zero scheme leaves the start point unchanged") {
    const Scheme zero(SchemeFamily::zero(), SchemeFamily::zero());
    const auto f = OperatorProvider::constant([](const ValueVector& x) { return ValueVector{x[1], 0.3}; },
                                              ZeroBox::unbounded(2));
    const auto t = iterate(f, zero, {0.7, 0.2}, steps(200));
    for (const auto& x : t.iterates) CHECK(x == ValueVector{0.7, 0.2});
    CHECK(t.errors.empty());
}

TEST_CASE("weighted example with constant learning rate stays away from zero") {
    const Scheme s(SchemeFamily::constant(0.5), SchemeFamily::harmonic());
    RecordOptions rec;
    rec.iterates = true;
    rec.dense_until = 20000;
    const auto t = iterate(weighted_example(), s, {1.0}, steps(20000), std::nullopt, rec);
    for (std::size_t k = 1000; k < t.size(); ++k) CHECK(t.iterates[k][0] > 0.3);
}

TEST_CASE("trajectory recording and stopping") {
    SUBCASE("strided recording") {
        RecordOptions rec;
        rec.dense_until = 10;
        rec.stride = 7;
        const auto t = iterate(halving(), table_scheme(1), {1.0}, steps(40), ValueVector{0.0}, rec);
        std::vector<std::size_t> expected;
        for (std::size_t n = 0; n <= 10; ++n) expected.push_back(n);
        for (std::size_t n = 14; n <= 40; n += 7) expected.push_back(n);
        expected.push_back(40);
        CHECK(t.steps == expected);
        CHECK(t.errors.size() == t.steps.size());
        CHECK(t.iterates.size() == t.steps.size());
        CHECK(std::isnan(t.alpha_min[0]));
        CHECK(t.alpha_min[1] == 0.0); // S1 starts with alpha = 1 - 1/1 = 0
        CHECK(t.alpha_min[2] == 0.5);
        CHECK(t.reason == Termination::MaxSteps);
        CHECK(t.steps_taken == 40);
    }
    SUBCASE("change threshold") {
        StoppingRule stop = steps(100000);
        stop.change_threshold = 1e-8;
        const auto t = iterate(halving(), table_scheme(5), {1.0}, stop);
        CHECK(t.reason == Termination::ChangeBelowThreshold);
        CHECK(t.max_change.back() < 1e-8);
        CHECK(t.steps.back() == t.steps_taken);
        CHECK(t.final_value == t.iterates.back());
    }
    SUBCASE("error threshold needs a reference") {
        StoppingRule stop = steps(10);
        stop.error_threshold = 1e-3;
        CHECK_THROWS_AS(iterate(halving(), table_scheme(2), {1.0}, stop), std::invalid_argument);
        const auto t = iterate(halving(), table_scheme(2), {1.0}, stop, ValueVector{0.0});
        CHECK(t.reason == Termination::ErrorBelowThreshold);
        CHECK(t.steps_taken == 1);
    }
    SUBCASE("steps strictly increase") {
        RecordOptions rec;
        rec.dense_until = 5;
        rec.stride = 5;
        const auto t = iterate(halving(), table_scheme(3), {1.0}, steps(25), std::nullopt, rec);
        for (std::size_t k = 1; k < t.size(); ++k) CHECK(t.steps[k] > t.steps[k - 1]);
    }
}

TEST_CASE("box violations report the step") {
    SUBCASE("start point outside the box") {
        CHECK_THROWS_AS(iterate(halving(), table_scheme(2), {2.0}, steps(5)), BoxViolation);
    }
    SUBCASE("operator leaves the box") {
        const OperatorProvider bad(ZeroBox{{1.0}}, [](std::size_t n, const ValueVector& x) {
            return ValueVector{n == 3 ? 4.0 : x[0]};
        });
        try {
            iterate(bad, table_scheme(2), {0.5}, steps(10));
            FAIL("expected BoxViolation");
        } catch (const BoxViolation& e) {
            CHECK(e.step() == 3);
        }
    }
    SUBCASE("negative output") {
        const OperatorProvider bad(ZeroBox::unbounded(1), [](std::size_t, const ValueVector&) {
            return ValueVector{-1.0};
        });
        CHECK_THROWS_AS(iterate(bad, table_scheme(2), {0.5}, steps(10)), BoxViolation);
    }
    SUBCASE("dimension") {
        CHECK_THROWS_AS(iterate(halving(), table_scheme(2), {0.5, 0.5}, steps(10)), DimensionMismatch);
    }
}

TEST_CASE("chaotic iteration") {
    const auto swap_half = OperatorProvider::constant(
        [](const ValueVector& x) { return ValueVector{x[1] / 2, x[0] / 2}; }, ZeroBox{{1.0, 1.0}});
    const Scheme s2 = table_scheme(2);
    const auto base = VectorScheme::per_component({s2, s2});

    SUBCASE("full index sets equal plain iteration") {
        const auto all = [](std::size_t) { return IndexSet{0, 1}; };
        const auto a = chaotic_iterate(swap_half, base, all, {1, 1}, steps(300));
        const auto b = iterate(swap_half, base, {1, 1}, steps(300));
        CHECK(a.iterates == b.iterates);
    }
    SUBCASE("empty index sets are no-ops") {
        const auto none = [](std::size_t) { return IndexSet{}; };
        const auto t = chaotic_iterate(swap_half, base, none, {1, 0.25}, steps(20));
        for (const auto& x : t.iterates) CHECK(x == ValueVector{1, 0.25});
    }
    SUBCASE("alternating components match the masked scheme bit for bit") {
        const auto alt = [](std::size_t n) { return IndexSet{n % 2}; };
        const auto a = chaotic_iterate(swap_half, base, alt, {1, 1}, steps(500), ValueVector{0, 0});
        const auto b = iterate(swap_half, VectorScheme::masked(base, alt), {1, 1}, steps(500), ValueVector{0, 0});
        REQUIRE(a.size() == b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            REQUIRE(a.iterates[k] == b.iterates[k]);
            REQUIRE(a.errors[k] == b.errors[k]);
        }
        CHECK(a.errors.back() < 1e-3);
    }
    SUBCASE("inactive components are copied verbatim") {
        const OperatorProvider noisy(ZeroBox::unbounded(3), [](std::size_t, const ValueVector& x) {
            return ValueVector{x[0] * 0.3 + 0.1, x[1] * 0.7, std::sqrt(x[2])};
        });
        const auto sets = [](std::size_t n) { return n % 3 == 0 ? IndexSet{0, 2} : IndexSet{1}; };
        const auto t = chaotic_iterate(noisy, VectorScheme::broadcast(table_scheme(4), 3), sets,
                                       {0.123456789, 1.0 / 3.0, 2.0}, steps(60));
        for (std::size_t k = 1; k < t.size(); ++k) {
            const auto active = sets(t.steps[k] - 1);
            for (std::size_t i = 0; i < 3; ++i)
                if (std::find(active.begin(), active.end(), i) == active.end())
                    REQUIRE(t.iterates[k][i] == t.iterates[k - 1][i]);
        }
    }
}

TEST_CASE("random chaotic iteration") {
    SUBCASE("one component is plain iteration") {
        const auto a = random_chaotic_iterate(halving(), table_scheme(2), 9, {1.0}, steps(100));
        const auto b = iterate(halving(), table_scheme(2), {1.0}, steps(100));
        CHECK(a.iterates == b.iterates);
        for (std::size_t k = 1; k < a.size(); ++k) CHECK(a.selected[k] == 0);
    }
    SUBCASE("reproducible and selects uniformly") {
        const auto f = OperatorProvider::constant(
            [](const ValueVector& x) { return ValueVector{x[1] / 2, x[0] / 2}; }, ZeroBox{{1.0, 1.0}});
        RecordOptions rec;
        rec.dense_until = 20000;
        const auto a = random_chaotic_iterate(f, table_scheme(2), 5, {1, 1}, steps(20000), std::nullopt, rec);
        const auto b = random_chaotic_iterate(f, table_scheme(2), 5, {1, 1}, steps(20000), std::nullopt, rec);
        CHECK(a.iterates == b.iterates);
        CHECK(a.selected == b.selected);
        std::size_t zeros = 0;
        for (std::size_t k = 1; k < a.size(); ++k) zeros += a.selected[k] == 0;
        CHECK(std::abs(static_cast<double>(zeros) / 20000.0 - 0.5) < 0.02);
        // local counters: each component uses the base scheme at its own count
        std::vector<std::size_t> counter(2, 0);
        for (std::size_t k = 1; k < a.size(); ++k) {
            const auto i = static_cast<std::size_t>(a.selected[k]);
            REQUIRE(a.beta_min[k] == table_scheme(2)(counter[i]).second);
            ++counter[i];
            REQUIRE(a.iterates[k][1 - i] == a.iterates[k - 1][1 - i]);
        }
    }
}

TEST_CASE("clamp_extend") {
    const Operator id = [](const ValueVector& x) { return x; };
    CHECK(clamp_extend(id, {1, 1})({3, 0.5}) == ValueVector{1, 0.5});
    CHECK(clamp_extend(id, {1, 1})({0.2, 0.5}) == ValueVector{0.2, 0.5});
    CHECK(clamp_extend(id, {kInfinity, kInfinity})({30, 0.5}) == ValueVector{30, 0.5});
    const Operator f = [](const ValueVector& x) { return ValueVector{(x[0] + x[1]) / 2, x[0]}; };
    const auto F = clamp_extend(f, {2, 2});
    CHECK(F({1, 1.5}) == f({1, 1.5}));
}

TEST_CASE("Kleene iteration") {
    const auto r1 = kleene_iterate([](const ValueVector& v) { return ValueVector{1 + 0.5 * v[0]}; }, 1, 1e-12, 1000);
    CHECK(r1.converged);
    CHECK(r1.value[0] == doctest::Approx(2.0).epsilon(1e-11));

    const auto r2 = kleene_iterate([](const ValueVector& v) { return v; }, 3, 1e-8, 1000);
    CHECK(r2.converged);
    CHECK(r2.steps == 1);
    CHECK(r2.value == ValueVector(3, 0.0));

    const auto r3 = kleene_iterate([](const ValueVector& v) { return ValueVector{1 + v[0]}; }, 1, 1e-8, 500);
    CHECK_FALSE(r3.converged);
    CHECK(r3.steps == 500);
    CHECK(r3.value[0] == 500.0);
}

TEST_CASE("progressing schemes reach the exact value on small games") {
    std::mt19937_64 rng(31);
    oracle::RandomGameOptions opts;
    opts.terminating_probability = 1.0;
    for (int g = 0; g < 15; ++g) {
        const Ssg game = oracle::random_game(rng, opts);
        const auto ref = oracle::kleene(game, 100000, 1e-14);
        const auto f = OperatorProvider::constant(bellman_operator(game), ZeroBox::unbounded(game.size()));
        for (int s : {1, 2, 5}) {
            const auto t = iterate(f, table_scheme(s), ValueVector(game.size(), 0.0), steps(100000), ref);
            CHECK(t.errors.back() < 1e-3);
        }
    }
}
