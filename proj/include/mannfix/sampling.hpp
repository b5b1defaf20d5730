#pragma once

#include "mannfix/ssg.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace mannfix {

using Rng = std::mt19937_64;

/// Structure of one (s, a) pair of the true model.
struct PairPrior {
    std::vector<std::size_t> support; ///< successors with T_a(s,s') > 0, ascending
    bool terminating = false;         ///< T_a(s) < 1 - kMassTolerance
    bool reward_positive = false;     ///< R_a(s) > 0
};

/// What the sampler is allowed to know about the true model up front.
class StructuralPrior {
public:
    explicit StructuralPrior(const Ssg& truth);

    const StateActionIndex& index() const { return index_; }
    const PairPrior& pair(std::size_t i) const { return pairs_[i]; }
    std::size_t pair_count() const { return pairs_.size(); }
    std::size_t state_count() const { return players_.size(); }
    Player player(std::size_t s) const { return players_[s]; }
    std::size_t action_count(std::size_t s) const { return index_.offset(s + 1) - index_.offset(s); }

private:
    StateActionIndex index_;
    std::vector<PairPrior> pairs_;
    std::vector<Player> players_;
};

struct PairCounts {
    std::vector<std::uint64_t> successor; ///< aligned with PairPrior::support
    std::uint64_t termination = 0;
    std::uint64_t total = 0;
    double reward = 0.0;
    bool reward_observed = false;
};

struct SamplerState {
    std::vector<PairCounts> pairs; ///< indexed by StateActionIndex
    std::uint64_t steps = 0;

    static SamplerState initial(const StructuralPrior& prior);
};

/// Optional hook applied to the reward on its first observation; never called
/// for zero-reward pairs.
using RewardNoise = std::function<double(double reward, Rng& rng)>;

/// One model step of (s, a) in the true model.  Throws std::out_of_range for
/// disabled actions.
void observe_step(SamplerState& state, const StructuralPrior& prior, const Ssg& truth, std::size_t s,
                  std::size_t a, Rng& rng, const RewardNoise& noise = {});

/// k observations at state-action pairs drawn uniformly.
void batch_observe(SamplerState& state, const StructuralPrior& prior, const Ssg& truth, std::size_t k, Rng& rng,
                   const RewardNoise& noise = {});

/// Empirical transition distribution of one pair as (target, prob); the rest
/// of the mass is termination.  Unobserved pairs are uniform over the
/// support, with one extra pseudo-successor share for terminating pairs.
std::vector<Transition> empirical_transitions(const PairCounts& counts, const PairPrior& prior);

/// Reward the empirical model uses for a pair.
double empirical_reward(const PairCounts& counts, const PairPrior& prior);

Ssg empirical_ssg(const SamplerState& state, const StructuralPrior& prior);

/// Checks the structural constraints of a sampling for a single G_n: same
/// states, players and actions; no mass outside the true support; no reward
/// where the true reward is 0; full mass where the true action never
/// terminates.
std::vector<Violation> sampling_validity_check(const Ssg& sampled, const StructuralPrior& prior,
                                               const Ssg& truth);

/// Truth, prior and sampler state of one run, with a cached empirical
/// Bellman operator that avoids rebuilding the SSG after every observation.
class Sampler {
public:
    explicit Sampler(Ssg truth);

    const Ssg& truth() const { return truth_; }
    const StructuralPrior& prior() const { return prior_; }
    const SamplerState& state() const { return state_; }
    void set_reward_noise(RewardNoise noise) { noise_ = std::move(noise); }

    void observe(std::size_t s, std::size_t a, Rng& rng);
    void batch_observe(std::size_t k, Rng& rng);

    Ssg empirical_ssg() const;
    /// f_{G_n}(x), identical to bellman_apply(empirical_ssg(), x).
    ValueVector empirical_bellman_apply(const ValueVector& x) const;
    double empirical_bellman_component(const ValueVector& x, std::size_t s) const;

    /// Counts sidecar (JSON) for resuming a run.
    std::string counts_to_json() const;
    void load_counts_json(const std::string& text);

private:
    void refresh(std::size_t pair) const;

    Ssg truth_;
    StructuralPrior prior_;
    SamplerState state_;
    RewardNoise noise_;
    mutable std::vector<Action> cache_;
    mutable std::vector<char> stale_;
};

} // namespace mannfix
