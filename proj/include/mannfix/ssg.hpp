#pragma once

#include "mannfix/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mannfix {

enum class Player { Max, Min };

struct Transition {
    std::size_t target = 0;
    double prob = 0.0;
};

struct Action {
    double reward = 0.0;
    std::vector<Transition> transitions; ///< sparse, targets distinct, prob > 0

    /// T_a(s) = sum of transition probabilities; 1 - mass is the termination probability.
    double mass() const;
};

/// Drops zero entries, merges duplicate targets (ascending order) and scales
/// down a mass that exceeds 1 by at most kMassTolerance.  Actions with
/// negative or NaN probabilities are left untouched.
void canonicalize_action(Action& action);

struct State {
    Player player = Player::Max;
    std::vector<Action> actions; ///< empty for final states

    bool is_final() const { return actions.empty(); }
};

struct Violation {
    std::string path; ///< e.g. "states[2].actions[0].transitions[1]"
    std::string message;
};

class InvalidModel : public std::invalid_argument {
public:
    explicit InvalidModel(std::vector<Violation> violations);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

/// Finite simple stochastic game; Markov chains and MDPs are special cases.
///
/// The constructor canonicalizes transitions (drops zero entries, merges
/// duplicate targets, scales down masses that exceed 1 by at most
/// kMassTolerance) but does not reject anything, so that `validate_ssg` can
/// report problems.  Use `Ssg::checked` for models from untrusted input.
class Ssg {
public:
    Ssg() = default;
    explicit Ssg(std::vector<State> states);

    /// Canonicalizes, then throws InvalidModel if validation finds anything.
    static Ssg checked(std::vector<State> states);

    std::size_t size() const { return states_.size(); }
    const State& state(std::size_t s) const { return states_[s]; }
    const std::vector<State>& states() const { return states_; }
    const Action& action(std::size_t s, std::size_t a) const { return states_[s].actions[a]; }
    std::size_t action_count(std::size_t s) const { return states_[s].actions.size(); }
    std::size_t pair_count() const;

    /// |A(s)| <= 1 everywhere.
    bool is_chain() const;

    Ssg with_scaled_rewards(double factor) const;

private:
    std::vector<State> states_;
};

std::vector<Violation> validate_ssg(const Ssg& game);

/// Bijection (s, a) <-> 0..sum |A(s)| - 1, ordered by state then action.
class StateActionIndex {
public:
    StateActionIndex() = default;
    explicit StateActionIndex(const Ssg& game);

    std::size_t size() const { return offsets_.empty() ? 0 : offsets_.back(); }
    std::size_t index(std::size_t s, std::size_t a) const;
    std::pair<std::size_t, std::size_t> pair(std::size_t index) const;
    std::size_t offset(std::size_t s) const { return offsets_[s]; }

private:
    std::vector<std::size_t> offsets_; ///< offsets_[s] = first index of state s; size |S|+1
};

/// f_G(v)(s) = max/min over A(s) of R_a(s) + sum T_a(s,s') v(s'); 0 on final states.
ValueVector bellman_apply(const Ssg& game, const ValueVector& v);
void bellman_apply_into(const Ssg& game, const ValueVector& v, ValueVector& out);
/// f_G(v)(s) for one state.
double bellman_component(const Ssg& game, const ValueVector& v, std::size_t s);

/// Value of action a at s under v: R_a(s) + sum T_a(s,s') v(s').
double action_value(const Action& action, const ValueVector& v);

/// g_G(q)(s,a) = R_a(s) + sum T_a(s,s') opt_{a'} q(s',a'), with opt = max/min by
/// the owner of s' and 0 for final s'.
ValueVector state_action_bellman_apply(const Ssg& game, const ValueVector& q);

/// Memoryless deterministic policy; nullopt marks states outside the domain.
struct Policy {
    std::vector<std::optional<std::size_t>> choice;

    static Policy empty(std::size_t states) { return Policy{std::vector<std::optional<std::size_t>>(states)}; }
};

/// A^pi(s) = {pi(s)} on the policy's domain. Throws std::invalid_argument
/// for actions that are not enabled.
Ssg restrict_policy(const Ssg& game, const Policy& policy);

/// States 0..|S|-1 are the originals; pair state |S| + index(s,a) follows.
/// Action a at s moves surely (reward 0) to the pair state, which is a MIN
/// state with the single action (R_a(s), T_a(s, .)).
Ssg split_state_action(const Ssg& game);

/// v -> f_G^k(v); k >= 1.
Operator k_step_operator(const Ssg& game, std::size_t k);

/// Operator view of f_G.
Operator bellman_operator(const Ssg& game);

const char* to_string(Player player);

} // namespace mannfix
