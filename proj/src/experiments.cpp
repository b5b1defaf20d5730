#include "mannfix/experiments.hpp"

#include "mannfix/iteration.hpp"
#include "mannfix/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

namespace mannfix {

using nlohmann::json;

namespace {

constexpr double kNormTolerance = 1e-6;
constexpr double kReferenceThreshold = 1e-12;

std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Ssg draw_structure(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    const std::size_t n = cfg.max_states + cfg.min_states;
    std::uniform_int_distribution<std::size_t> action_count(1, cfg.max_actions);
    std::uniform_int_distribution<std::size_t> successor_count(1, std::min(cfg.max_successors, n));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::size_t> pool(n);
    std::vector<State> states(n);
    for (std::size_t s = 0; s < n; ++s) {
        states[s].player = s < cfg.max_states ? Player::Max : Player::Min;
        const std::size_t actions = action_count(rng);
        for (std::size_t a = 0; a < actions; ++a) {
            Action action;
            const std::size_t k = successor_count(rng);
            std::iota(pool.begin(), pool.end(), 0);
            // Partial Fisher-Yates: the first k entries become a uniform k-subset.
            for (std::size_t j = 0; j < k; ++j) {
                std::uniform_int_distribution<std::size_t> pick(j, n - 1);
                std::swap(pool[j], pool[pick(rng)]);
            }
            std::vector<double> weights(k);
            double total = 0.0;
            for (auto& w : weights) {
                w = 1.0 - unit(rng); // (0, 1]
                total += w;
            }
            double keep = 1.0;
            if (unit(rng) < cfg.termination_probability) keep = 1.0 - 0.5 * (1.0 - unit(rng)); // mass in (0, 0.5]
            for (std::size_t j = 0; j < k; ++j) action.transitions.push_back({pool[j], keep * weights[j] / total});
            action.reward = cfg.reward_max * unit(rng);
            states[s].actions.push_back(std::move(action));
        }
    }
    return Ssg(std::move(states));
}

std::string format_number(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

void reject_unknown(const json& node, std::initializer_list<const char*> allowed, const std::string& where) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) known = known || it.key() == key;
        if (!known) throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
void read(const json& node, const char* key, T& target) {
    if (auto it = node.find(key); it != node.end()) target = it->get<T>();
}

} // namespace

void GeneratorConfig::validate() const {
    if (min_states + max_states == 0) throw std::invalid_argument("generator needs at least one state");
    if (max_actions == 0 || max_successors == 0)
        throw std::invalid_argument("generator needs max_actions and max_successors >= 1");
    if (!(termination_probability >= 0.0 && termination_probability <= 1.0))
        throw std::invalid_argument("termination_probability must be in [0,1]");
    if (!(reward_max > 0.0) || !std::isfinite(reward_max)) throw std::invalid_argument("reward_max must be positive");
    if (kleene_budget == 0 || !(kleene_threshold > 0.0))
        throw std::invalid_argument("kleene budget and threshold must be positive");
    if (rejection_cap == 0) throw std::invalid_argument("rejection_cap must be positive");
}

GenerationFailed::GenerationFailed(const RejectionStats& stats)
    : std::runtime_error("no game passed the filters after " + std::to_string(stats.attempts) +
                         " attempts (kleene failures " + std::to_string(stats.kleene_failures) + ", zero value " +
                         std::to_string(stats.zero_value) + ", normalization failures " +
                         std::to_string(stats.normalization_failures) + ")"),
      stats_(stats) {}

ValueVector reference_value(const Ssg& game, std::size_t budget) {
    const KleeneResult r = kleene_iterate(bellman_operator(game), game.size(), kReferenceThreshold, budget);
    if (!r.converged) throw std::runtime_error("reference Kleene iteration did not converge");
    return r.value;
}

GeneratedGame generate_random_ssg(const GeneratorConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    RejectionStats stats;
    while (stats.attempts < cfg.rejection_cap) {
        ++stats.attempts;
        const Ssg raw = draw_structure(cfg, rng);
        const KleeneResult filter = kleene_iterate(bellman_operator(raw), raw.size(), cfg.kleene_threshold,
                                                   cfg.kleene_budget);
        if (!filter.converged) {
            ++stats.kleene_failures;
            continue;
        }
        const ValueVector value = reference_value(raw);
        const double norm = sup_norm(value);
        if (norm == 0.0) {
            ++stats.zero_value;
            continue;
        }
        GeneratedGame out{raw.with_scaled_rewards(1.0 / norm), {}, {}};
        out.reference = reference_value(out.game);
        if (std::abs(sup_norm(out.reference) - 1.0) > kNormTolerance) {
            ++stats.normalization_failures;
            continue;
        }
        out.stats = stats;
        return out;
    }
    throw GenerationFailed(stats);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t game, std::uint64_t purpose) {
    return mix(mix(mix(base) ^ game) ^ (purpose * 0xd1b54a32d192ed03ULL));
}

const char* to_string(RunMode mode) { return mode == RunMode::Full ? "full" : "chaotic"; }

std::vector<NamedScheme> table_scheme_set(std::uint64_t uniform_seed) {
    std::vector<NamedScheme> out;
    for (auto& [name, scheme] : table_schemes(uniform_seed)) out.push_back({name, scheme});
    return out;
}

ValueVector start_point(const ExperimentGame& game, const RunConfig& cfg, std::uint64_t seed) {
    const std::size_t d = game.game.size();
    if (cfg.start == StartPoint::Zero) return ValueVector(d, 0.0);
    std::mt19937_64 rng(derive_seed(seed, game.id, 3));
    std::uniform_real_distribution<double> draw(0.0, 2.0);
    ValueVector x(d);
    for (auto& v : x) v = draw(rng);
    return x;
}

namespace {

void append_records(std::vector<RunRecord>& out, const Trajectory& traj, const ExperimentGame& game,
                    const std::string& scheme, RunMode mode, std::uint64_t seed, bool per_state) {
    for (std::size_t k = 0; k < traj.size(); ++k) {
        RunRecord r;
        r.game_id = game.id;
        r.scheme = scheme;
        r.mode = mode;
        r.seed = seed;
        r.step = traj.steps[k];
        r.error = traj.errors[k];
        if (per_state) {
            r.state_errors.resize(game.reference.size());
            for (std::size_t s = 0; s < game.reference.size(); ++s)
                r.state_errors[s] = std::abs(traj.iterates[k][s] - game.reference[s]);
        }
        out.push_back(std::move(r));
    }
}

} // namespace

std::vector<RunRecord> run_full_experiment(const std::vector<ExperimentGame>& games,
                                           const std::vector<NamedScheme>& schemes, const RunConfig& cfg) {
    std::vector<RunRecord> out;
    for (const auto& game : games)
        for (const auto& named : schemes)
            for (auto seed : cfg.seeds) {
                Sampler sampler(game.game);
                Rng rng(derive_seed(seed, game.id, 1));
                OperatorProvider provider(ZeroBox::unbounded(game.game.size()),
                                          [&](std::size_t, const ValueVector& x) {
                                              sampler.batch_observe(cfg.samples_per_step, rng);
                                              return sampler.empirical_bellman_apply(x);
                                          });
                RecordOptions record;
                record.dense_until = cfg.full_steps;
                record.iterates = cfg.per_state_errors;
                const Trajectory traj = iterate(provider, named.scheme, start_point(game, cfg, seed),
                                                StoppingRule{cfg.full_steps, {}, {}}, game.reference, record);
                append_records(out, traj, game, named.name, RunMode::Full, seed, cfg.per_state_errors);
            }
    return out;
}

std::vector<RunRecord> run_chaotic_experiment(const std::vector<ExperimentGame>& games,
                                              const std::vector<NamedScheme>& schemes, const RunConfig& cfg) {
    if (cfg.chaotic_record_stride == 0) throw std::invalid_argument("chaotic_record_stride must be >= 1");
    std::vector<RunRecord> out;
    for (const auto& game : games)
        for (const auto& named : schemes)
            for (auto seed : cfg.seeds) {
                Sampler sampler(game.game);
                Rng rng(derive_seed(seed, game.id, 1));
                OperatorProvider provider(
                    ZeroBox::unbounded(game.game.size()),
                    [&](std::size_t, const ValueVector& x) {
                        sampler.batch_observe(cfg.chaotic_samples_per_step, rng);
                        return sampler.empirical_bellman_apply(x);
                    },
                    [&](std::size_t, const ValueVector& x, std::size_t i) {
                        sampler.batch_observe(cfg.chaotic_samples_per_step, rng);
                        return sampler.empirical_bellman_component(x, i);
                    });
                RecordOptions record;
                record.dense_until = 0;
                record.stride = cfg.chaotic_record_stride;
                record.iterates = cfg.per_state_errors;
                const Trajectory traj =
                    random_chaotic_iterate(provider, named.scheme, derive_seed(seed, game.id, 2),
                                           start_point(game, cfg, seed), StoppingRule{cfg.chaotic_steps, {}, {}},
                                           game.reference, record);
                append_records(out, traj, game, named.name, RunMode::Chaotic, seed, cfg.per_state_errors);
            }
    return out;
}

double nearest_rank(const std::vector<double>& sorted, double percent) {
    if (sorted.empty()) throw std::invalid_argument("nearest_rank of an empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percent / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");
    std::vector<std::string> scheme_order;
    std::map<std::tuple<std::size_t, int, std::size_t>, std::vector<double>> groups;
    for (const auto& r : records) {
        auto pos = std::find(scheme_order.begin(), scheme_order.end(), r.scheme);
        if (pos == scheme_order.end()) pos = scheme_order.insert(scheme_order.end(), r.scheme);
        const auto scheme_id = static_cast<std::size_t>(pos - scheme_order.begin());
        groups[{scheme_id, static_cast<int>(r.mode), r.step}].push_back(r.error);
    }
    std::vector<AggregateRow> rows;
    rows.reserve(groups.size());
    for (auto& [key, errors] : groups) {
        std::sort(errors.begin(), errors.end());
        AggregateRow row;
        row.scheme = scheme_order[std::get<0>(key)];
        row.mode = static_cast<RunMode>(std::get<1>(key));
        row.step = std::get<2>(key);
        row.count = errors.size();
        row.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(errors.size());
        row.p25 = nearest_rank(errors, 25.0);
        row.p75 = nearest_rank(errors, 75.0);
        row.min = errors.front();
        row.max = errors.back();
        rows.push_back(std::move(row));
    }
    return rows;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    const json doc = json::parse(text);
    ExperimentConfig cfg;
    reject_unknown(doc, {"games", "uniform_seed", "schemes", "paper_scale", "generator", "run"}, "config");
    if (doc.value("paper_scale", false)) cfg.apply_paper_scale();
    read(doc, "games", cfg.games);
    read(doc, "uniform_seed", cfg.uniform_seed);
    read(doc, "schemes", cfg.schemes);
    if (auto it = doc.find("generator"); it != doc.end()) {
        reject_unknown(*it,
                       {"min_states", "max_states", "max_actions", "max_successors", "termination_probability",
                        "reward_max", "kleene_budget", "kleene_threshold", "rejection_cap", "seed"},
                       "generator");
        auto& g = cfg.generator;
        read(*it, "min_states", g.min_states);
        read(*it, "max_states", g.max_states);
        read(*it, "max_actions", g.max_actions);
        read(*it, "max_successors", g.max_successors);
        read(*it, "termination_probability", g.termination_probability);
        read(*it, "reward_max", g.reward_max);
        read(*it, "kleene_budget", g.kleene_budget);
        read(*it, "kleene_threshold", g.kleene_threshold);
        read(*it, "rejection_cap", g.rejection_cap);
        read(*it, "seed", g.seed);
    }
    if (auto it = doc.find("run"); it != doc.end()) {
        reject_unknown(*it,
                       {"full_steps", "chaotic_steps", "samples_per_step", "chaotic_samples_per_step",
                        "chaotic_record_stride", "seeds", "start", "per_state_errors"},
                       "run");
        auto& r = cfg.run;
        read(*it, "full_steps", r.full_steps);
        read(*it, "chaotic_steps", r.chaotic_steps);
        read(*it, "samples_per_step", r.samples_per_step);
        read(*it, "chaotic_samples_per_step", r.chaotic_samples_per_step);
        read(*it, "chaotic_record_stride", r.chaotic_record_stride);
        read(*it, "seeds", r.seeds);
        read(*it, "per_state_errors", r.per_state_errors);
        if (auto start = it->find("start"); start != it->end()) {
            const auto value = start->get<std::string>();
            if (value != "zero" && value != "random") throw std::invalid_argument("run.start must be zero or random");
            r.start = value == "zero" ? StartPoint::Zero : StartPoint::Random;
        }
    }
    cfg.generator.validate();
    if (cfg.run.seeds.empty()) throw std::invalid_argument("run.seeds must not be empty");
    return cfg;
}

std::string ExperimentConfig::to_json() const {
    const auto& g = generator;
    const auto& r = run;
    json doc{{"games", games},
             {"uniform_seed", uniform_seed},
             {"schemes", schemes},
             {"generator",
              {{"min_states", g.min_states},
               {"max_states", g.max_states},
               {"max_actions", g.max_actions},
               {"max_successors", g.max_successors},
               {"termination_probability", g.termination_probability},
               {"reward_max", g.reward_max},
               {"kleene_budget", g.kleene_budget},
               {"kleene_threshold", g.kleene_threshold},
               {"rejection_cap", g.rejection_cap},
               {"seed", g.seed}}},
             {"run",
              {{"full_steps", r.full_steps},
               {"chaotic_steps", r.chaotic_steps},
               {"samples_per_step", r.samples_per_step},
               {"chaotic_samples_per_step", r.chaotic_samples_per_step},
               {"chaotic_record_stride", r.chaotic_record_stride},
               {"seeds", r.seeds},
               {"start", r.start == StartPoint::Zero ? "zero" : "random"},
               {"per_state_errors", r.per_state_errors}}}};
    return doc.dump(2);
}

void ExperimentConfig::apply_paper_scale() { games = 50; }

std::vector<NamedScheme> resolve_schemes(const ExperimentConfig& cfg) {
    const auto table = table_scheme_set(cfg.uniform_seed);
    if (cfg.schemes.empty()) return table;
    std::vector<NamedScheme> out;
    for (const auto& entry : cfg.schemes) {
        auto it = std::find_if(table.begin(), table.end(), [&](const NamedScheme& s) { return s.name == entry; });
        if (it != table.end())
            out.push_back(*it);
        else
        {
            std::string name = entry; // keep records.csv parseable
            std::replace(name.begin(), name.end(), ',', ';');
            out.push_back({name, Scheme::parse(entry)});
        }
    }
    return out;
}

std::vector<ExperimentGame> generate_games(const ExperimentConfig& cfg) {
    std::mt19937_64 rng(cfg.generator.seed);
    std::vector<ExperimentGame> games;
    for (std::size_t i = 0; i < cfg.games; ++i) {
        GeneratedGame g = generate_random_ssg(cfg.generator, rng);
        games.push_back({i, std::move(g.game), std::move(g.reference)});
    }
    return games;
}

void write_records_csv(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "game_id,scheme,mode,seed,step,error\n";
    for (const auto& r : records)
        out << r.game_id << ',' << r.scheme << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.step << ','
            << format_number(r.error) << '\n';
}

void write_state_errors_csv(const std::vector<RunRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "game_id,scheme,mode,seed,step,state,error\n";
    for (const auto& r : records)
        for (std::size_t s = 0; s < r.state_errors.size(); ++s)
            out << r.game_id << ',' << r.scheme << ',' << to_string(r.mode) << ',' << r.seed << ',' << r.step << ','
                << s << ',' << format_number(r.state_errors[s]) << '\n';
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "scheme,mode,step,mean,p25,p75,min,max\n";
    for (const auto& r : rows)
        out << r.scheme << ',' << to_string(r.mode) << ',' << r.step << ',' << format_number(r.mean) << ','
            << format_number(r.p25) << ',' << format_number(r.p75) << ',' << format_number(r.min) << ','
            << format_number(r.max) << '\n';
}

} // namespace mannfix
