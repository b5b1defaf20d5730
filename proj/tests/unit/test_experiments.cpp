#include "mannfix/analysis.hpp"
#include "mannfix/experiments.hpp"
#include "mannfix/iteration.hpp"
#include "mannfix/model_io.hpp"
#include "mannfix/sampling.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace mannfix;

namespace {

GeneratorConfig small_generator() {
    GeneratorConfig cfg;
    cfg.min_states = 3;
    cfg.max_states = 3;
    cfg.max_actions = 3;
    return cfg;
}

std::vector<ExperimentGame> small_games(std::size_t count) {
    std::mt19937_64 rng(4);
    std::vector<ExperimentGame> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto g = generate_random_ssg(small_generator(), rng);
        out.push_back({i, std::move(g.game), std::move(g.reference)});
    }
    return out;
}

RunRecord record(const std::string& scheme, std::size_t game, std::size_t step, double error) {
    RunRecord r;
    r.scheme = scheme;
    r.game_id = game;
    r.step = step;
    r.error = error;
    return r;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("generator produces normalized valid games") {
    std::mt19937_64 rng(1);
    const GeneratorConfig cfg;
    for (int i = 0; i < 3; ++i) {
        const auto g = generate_random_ssg(cfg, rng);
        CHECK(validate_ssg(g.game).empty());
        CHECK(g.game.size() == 30);
        CHECK(std::abs(sup_norm(g.reference) - 1.0) <= 1e-6);
        for (std::size_t s = 0; s < 30; ++s) {
            CHECK(g.game.state(s).player == (s < 15 ? Player::Max : Player::Min));
            CHECK(g.game.action_count(s) >= 1);
            CHECK(g.game.action_count(s) <= 5);
            for (const auto& a : g.game.state(s).actions) {
                CHECK(a.transitions.size() <= 3);
                CHECK(a.mass() >= 0.5 - 1e-12);
                CHECK(a.reward >= 0.0);
            }
        }
        const auto kleene = kleene_iterate(bellman_operator(g.game), 30, 1e-8, 10000);
        CHECK(kleene.converged);
        CHECK(g.stats.attempts >= 1);
    }
}

TEST_CASE("generator is deterministic") {
    std::mt19937_64 a(99), b(99);
    const auto ga = generate_random_ssg(small_generator(), a);
    const auto gb = generate_random_ssg(small_generator(), b);
    CHECK(model_to_json(ga.game) == model_to_json(gb.game));
    CHECK(ga.reference == gb.reference);
}

TEST_CASE("degenerate generator config gives a two-state chain") {
    GeneratorConfig cfg;
    cfg.min_states = 1;
    cfg.max_states = 1;
    cfg.max_actions = 1;
    std::mt19937_64 rng(3);
    const auto g = generate_random_ssg(cfg, rng);
    CHECK(g.game.size() == 2);
    CHECK(g.game.is_chain());
}

TEST_CASE("generator config validation and rejection cap") {
    GeneratorConfig bad;
    bad.max_actions = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = GeneratorConfig{};
    bad.termination_probability = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = GeneratorConfig{};
    bad.kleene_threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    GeneratorConfig never;
    never.termination_probability = 0.0; // every action keeps full mass: values diverge
    never.rejection_cap = 20;
    std::mt19937_64 rng(1);
    try {
        generate_random_ssg(never, rng);
        FAIL("expected GenerationFailed");
    } catch (const GenerationFailed& e) {
        CHECK(e.stats().attempts == 20);
        CHECK(e.stats().kleene_failures + e.stats().zero_value + e.stats().normalization_failures == 20);
    }
}

TEST_CASE("reward scaling scales the exact value") {
    std::mt19937_64 rng(6);
    for (int g = 0; g < 50; ++g) {
        const Ssg game = oracle::random_game(rng);
        const auto base = exact_ssg_value(game).value;
        for (double c : {0.5, 3.0, 1e-3}) {
            const auto scaled = exact_ssg_value(game.with_scaled_rewards(c)).value;
            for (std::size_t s = 0; s < game.size(); ++s) {
                if (base[s] == kInfinity)
                    CHECK(scaled[s] == kInfinity);
                else
                    CHECK(oracle::rel_close(scaled[s], c * base[s], 1e-9));
            }
        }
    }
}

TEST_CASE("derived seeds separate purposes and games") {
    CHECK(derive_seed(1, 0, 1) == derive_seed(1, 0, 1));
    CHECK(derive_seed(1, 0, 1) != derive_seed(1, 0, 2));
    CHECK(derive_seed(1, 0, 1) != derive_seed(1, 1, 1));
    CHECK(derive_seed(1, 0, 1) != derive_seed(2, 0, 1));
}

TEST_CASE("full experiment runs") {
    const auto games = small_games(2);
    const auto schemes = table_scheme_set(6);
    RunConfig cfg;
    cfg.full_steps = 50;

    SUBCASE("six curves per game with a record per step") {
        const auto recs = run_full_experiment(games, schemes, cfg);
        CHECK(recs.size() == 2 * 6 * 51);
        for (const auto& r : recs) {
            CHECK(r.error >= 0.0);
            CHECK(r.step <= 50);
            CHECK(r.mode == RunMode::Full);
        }
    }
    SUBCASE("zero steps leaves only the initial error") {
        cfg.full_steps = 0;
        const auto recs = run_full_experiment(games, schemes, cfg);
        CHECK(recs.size() == 12);
        for (const auto& r : recs) CHECK(r.error == doctest::Approx(1.0).epsilon(1e-6));
    }
    SUBCASE("deterministic") {
        const auto a = run_full_experiment(games, schemes, cfg);
        const auto b = run_full_experiment(games, schemes, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].error == b[i].error);
    }
    SUBCASE("zero scheme from the exact value keeps the error constant") {
        const std::vector<NamedScheme> zero{{"zero", Scheme(SchemeFamily::zero(), SchemeFamily::zero())}};
        std::vector<ExperimentGame> exact = games;
        // runs start at 0, so a zero reference puts the start point on it
        for (auto& g : exact) g.reference = ValueVector(g.game.size(), 0.0);
        const auto recs = run_full_experiment(exact, zero, cfg);
        for (const auto& r : recs) CHECK(r.error == 0.0);
        const auto chaotic = run_chaotic_experiment(exact, zero, cfg);
        for (const auto& r : chaotic) CHECK(r.error == 0.0);
    }
    SUBCASE("per-state errors") {
        cfg.per_state_errors = true;
        cfg.full_steps = 5;
        const auto recs = run_full_experiment(games, {schemes[1]}, cfg);
        for (const auto& r : recs) {
            REQUIRE(r.state_errors.size() == 6);
            CHECK(*std::max_element(r.state_errors.begin(), r.state_errors.end()) ==
                  doctest::Approx(r.error).epsilon(1e-15));
        }
    }
    SUBCASE("random start points lie in [0,2]") {
        cfg.start = StartPoint::Random;
        const auto x = start_point(games[0], cfg, 1);
        for (double v : x) {
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
        CHECK(start_point(games[0], cfg, 1) == x);
    }
}

TEST_CASE("chaotic experiment runs") {
    const auto games = small_games(1);
    RunConfig cfg;
    cfg.chaotic_steps = 90;
    cfg.chaotic_record_stride = 30;
    const auto recs = run_chaotic_experiment(games, {table_scheme_set(6)[1]}, cfg);
    std::vector<std::size_t> steps;
    for (const auto& r : recs) steps.push_back(r.step);
    CHECK(steps == std::vector<std::size_t>{0, 30, 60, 90});
    const auto again = run_chaotic_experiment(games, {table_scheme_set(6)[1]}, cfg);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].error == again[i].error);
}

TEST_CASE("single-state chaotic updates match full updates with one sample") {
    // with d = 1 the chaotic run selects the only state every step
    const Ssg one({State{Player::Max, {Action{0.5, {{0, 0.5}}}}}});
    const std::vector<ExperimentGame> games{{0, one, {1.0}}};
    RunConfig cfg;
    cfg.full_steps = 200;
    cfg.chaotic_steps = 200;
    cfg.samples_per_step = 1;
    cfg.chaotic_record_stride = 1;
    const auto schemes = table_scheme_set(6);
    const auto full = run_full_experiment(games, schemes, cfg);
    const auto chaotic = run_chaotic_experiment(games, schemes, cfg);
    REQUIRE(full.size() == chaotic.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(full[i].error == chaotic[i].error);
}

TEST_CASE("resource parity between full and chaotic runs") {
    std::mt19937_64 rng(12);
    const auto g = generate_random_ssg(GeneratorConfig{}, rng).game;
    const std::size_t N = 20;
    Rng r1(1), r2(1);

    Sampler full_sampler(g);
    std::size_t full_updates = 0;
    const OperatorProvider full(ZeroBox::unbounded(30), [&](std::size_t, const ValueVector& x) {
        full_sampler.batch_observe(30, r1);
        full_updates += 30;
        return full_sampler.empirical_bellman_apply(x);
    });
    iterate(full, table_scheme(2), ValueVector(30, 0.0), StoppingRule{N, {}, {}});

    Sampler chaotic_sampler(g);
    std::size_t chaotic_updates = 0;
    const OperatorProvider chaotic(
        ZeroBox::unbounded(30),
        [&](std::size_t, const ValueVector&) -> ValueVector { throw std::logic_error("full evaluation"); },
        [&](std::size_t, const ValueVector& x, std::size_t i) {
            chaotic_sampler.batch_observe(1, r2);
            ++chaotic_updates;
            return chaotic_sampler.empirical_bellman_component(x, i);
        });
    random_chaotic_iterate(chaotic, table_scheme(2), 3, ValueVector(30, 0.0), StoppingRule{30 * N, {}, {}});

    CHECK(full_sampler.state().steps == 30 * N);
    CHECK(chaotic_sampler.state().steps == 30 * N);
    CHECK(full_updates == 30 * N);
    CHECK(chaotic_updates == 30 * N);
}

TEST_CASE("aggregation") {
    SUBCASE("single game") {
        const auto rows = aggregate({record("S1", 0, 0, 0.7), record("S1", 0, 1, 0.3)});
        REQUIRE(rows.size() == 2);
        for (const auto& r : rows) {
            CHECK(r.mean == r.min);
            CHECK(r.max == r.min);
            CHECK(r.p25 == r.min);
            CHECK(r.p75 == r.min);
        }
    }
    SUBCASE("two games") {
        const auto rows = aggregate({record("S1", 0, 5, 0.0), record("S1", 1, 5, 1.0)});
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].mean == 0.5);
        CHECK(rows[0].min == 0.0);
        CHECK(rows[0].max == 1.0);
        CHECK(rows[0].count == 2);
    }
    SUBCASE("duplicating the population keeps the mean") {
        std::vector<RunRecord> recs;
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t g = 0; g < 7; ++g) recs.push_back(record("S2", g, 3, unit(rng)));
        auto doubled = recs;
        doubled.insert(doubled.end(), recs.begin(), recs.end());
        const auto a = aggregate(recs), b = aggregate(doubled);
        CHECK(a[0].mean == doctest::Approx(b[0].mean).epsilon(1e-15));
        CHECK(a[0].min == b[0].min);
        CHECK(a[0].max == b[0].max);
        CHECK(a[0].min <= a[0].p25);
        CHECK(a[0].p25 <= a[0].p75);
        CHECK(a[0].p75 <= a[0].max);
        CHECK(a[0].mean >= a[0].min);
        CHECK(a[0].mean <= a[0].max);
    }
    SUBCASE("nearest rank") {
        const std::vector<double> v{1, 2, 3, 4};
        CHECK(nearest_rank(v, 25) == 1);
        CHECK(nearest_rank(v, 75) == 3);
        CHECK(nearest_rank(v, 100) == 4);
        CHECK(nearest_rank(v, 0) == 1);
    }
    CHECK_THROWS_AS(aggregate({}), std::invalid_argument);
}

TEST_CASE("experiment config") {
    const auto cfg = ExperimentConfig::from_json(
        R"({"games": 3, "schemes": ["S2", "alpha=const:0.3,beta=harmonic"],
            "generator": {"max_states": 4, "min_states": 2}, "run": {"full_steps": 7, "start": "random"}})");
    CHECK(cfg.games == 3);
    CHECK(cfg.generator.max_states == 4);
    CHECK(cfg.run.full_steps == 7);
    CHECK(cfg.run.start == StartPoint::Random);
    const auto schemes = resolve_schemes(cfg);
    REQUIRE(schemes.size() == 2);
    CHECK(schemes[0].name == "S2");
    CHECK(schemes[1].name == "alpha=const:0.3;beta=harmonic");

    const auto back = ExperimentConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());

    CHECK(ExperimentConfig::from_json(R"({"paper_scale": true})").games == 50);
    CHECK(ExperimentConfig::from_json("{}").games == 10);
    CHECK(resolve_schemes(ExperimentConfig{}).size() == 6);
    CHECK_THROWS(ExperimentConfig::from_json(R"({"gamez": 3})"));
    CHECK_THROWS(ExperimentConfig::from_json(R"({"run": {"bogus": 1}})"));
}

TEST_CASE("csv outputs") {
    const auto dir = std::filesystem::temp_directory_path() / "mannfix_csv_test";
    std::filesystem::create_directories(dir);
    std::vector<RunRecord> recs{record("S1", 0, 0, 1.0), record("S1", 0, 1, 0.25)};
    write_records_csv(recs, (dir / "records.csv").string());
    write_aggregate_csv(aggregate(recs), (dir / "aggregate.csv").string());
    CHECK(read_file(dir / "records.csv") == "game_id,scheme,mode,seed,step,error\n0,S1,full,0,0,1\n0,S1,full,0,1,0.25\n");
    const auto agg = read_file(dir / "aggregate.csv");
    CHECK(agg.rfind("scheme,mode,step,mean,p25,p75,min,max\n", 0) == 0);
    CHECK(agg.find("S1,full,1,0.25,0.25,0.25,0.25,0.25\n") != std::string::npos);
    std::filesystem::remove_all(dir);
}
