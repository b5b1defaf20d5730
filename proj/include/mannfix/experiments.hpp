#pragma once

#include "mannfix/scheme.hpp"
#include "mannfix/ssg.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mannfix {

struct GeneratorConfig {
    std::size_t min_states = 15;
    std::size_t max_states = 15;
    std::size_t max_actions = 5;
    std::size_t max_successors = 3;
    /// Probability that an action keeps a termination mass drawn from (0, 0.5].
    double termination_probability = 0.9;
    double reward_max = 1.0;
    std::size_t kleene_budget = 10000;
    double kleene_threshold = 1e-8;
    std::size_t rejection_cap = 10000;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument for out-of-range fields.
    void validate() const;
};

struct RejectionStats {
    std::size_t attempts = 0;
    std::size_t kleene_failures = 0;    ///< no convergence within the budget
    std::size_t zero_value = 0;         ///< value identically 0, cannot be normalized
    std::size_t normalization_failures = 0;
};

class GenerationFailed : public std::runtime_error {
public:
    explicit GenerationFailed(const RejectionStats& stats);
    const RejectionStats& stats() const { return stats_; }

private:
    RejectionStats stats_;
};

struct GeneratedGame {
    Ssg game;              ///< rewards rescaled so that ||mu f_G|| = 1
    ValueVector reference; ///< tight Kleene value of the rescaled game
    RejectionStats stats;
};

/// MAX states come first (max_states of them), then MIN states.  Redraws
/// until Kleene converges within the budget and the rescaled value has sup
/// norm 1 within 1e-6.
GeneratedGame generate_random_ssg(const GeneratorConfig& cfg, std::mt19937_64& rng);

/// Reference value used by the experiments: Kleene at threshold 1e-12.
ValueVector reference_value(const Ssg& game, std::size_t budget = 1'000'000);

/// Independent stream seed for (base, game, purpose).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t game, std::uint64_t purpose);

enum class RunMode { Full, Chaotic };
const char* to_string(RunMode mode);

struct ExperimentGame {
    std::size_t id = 0;
    Ssg game;
    ValueVector reference;
};

struct NamedScheme {
    std::string name;
    Scheme scheme;
};

std::vector<NamedScheme> table_scheme_set(std::uint64_t uniform_seed);

enum class StartPoint { Zero, Random };

struct RunConfig {
    std::size_t full_steps = 1000;
    std::size_t chaotic_steps = 30000;
    std::size_t samples_per_step = 30;        ///< observations before each full step
    std::size_t chaotic_samples_per_step = 1; ///< observations before each chaotic step
    /// Chaotic runs record every chaotic_record_stride steps (plus step 0 and the last).
    std::size_t chaotic_record_stride = 30;
    std::vector<std::uint64_t> seeds{1};
    StartPoint start = StartPoint::Zero;
    bool per_state_errors = false;
};

struct RunRecord {
    std::size_t game_id = 0;
    std::string scheme;
    RunMode mode = RunMode::Full;
    std::uint64_t seed = 0;
    std::size_t step = 0;
    double error = 0.0;
    ValueVector state_errors; ///< |x(s) - mu f(s)|, only with per_state_errors
};

ValueVector start_point(const ExperimentGame& game, const RunConfig& cfg, std::uint64_t seed);

/// Sample `samples_per_step` observations, then one Mann step against the
/// empirical Bellman operator; error against the reference after every step.
std::vector<RunRecord> run_full_experiment(const std::vector<ExperimentGame>& games,
                                           const std::vector<NamedScheme>& schemes, const RunConfig& cfg);

/// One observation and one random-component update per step, with local
/// counters; error recorded every chaotic_record_stride steps.
std::vector<RunRecord> run_chaotic_experiment(const std::vector<ExperimentGame>& games,
                                              const std::vector<NamedScheme>& schemes, const RunConfig& cfg);

struct AggregateRow {
    std::string scheme;
    RunMode mode = RunMode::Full;
    std::size_t step = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Statistics per (scheme, mode, step) across games and seeds; percentiles by
/// nearest rank.  Throws std::invalid_argument on an empty record set.
std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& records);

/// Value at nearest rank ceil(p/100 * n) of an ascending sample.
double nearest_rank(const std::vector<double>& sorted, double percent);

struct ExperimentConfig {
    GeneratorConfig generator;
    RunConfig run;
    std::size_t games = 10;
    std::uint64_t uniform_seed = 6;
    std::vector<std::string> schemes; ///< names S1..S6 or scheme specs; empty = all of Table 1

    /// Overrides from JSON; unknown keys are rejected.
    static ExperimentConfig from_json(const std::string& text);
    std::string to_json() const;
    /// The published protocol: 50 games.
    void apply_paper_scale();
};

std::vector<NamedScheme> resolve_schemes(const ExperimentConfig& cfg);
std::vector<ExperimentGame> generate_games(const ExperimentConfig& cfg);

void write_records_csv(const std::vector<RunRecord>& records, const std::string& path);
void write_state_errors_csv(const std::vector<RunRecord>& records, const std::string& path);
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& path);

} // namespace mannfix
