#include "mannfix/ssg.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace mannfix {

namespace {

std::string action_path(std::size_t s, std::size_t a) {
    return "states[" + std::to_string(s) + "].actions[" + std::to_string(a) + "]";
}

std::string summarize(const std::vector<Violation>& violations) {
    std::string text = "invalid model:";
    for (const auto& v : violations) text += "\n  " + v.path + ": " + v.message;
    return text;
}

} // namespace

void canonicalize_action(Action& action) {
    std::map<std::size_t, double> merged;
    bool negative = false;
    for (const auto& t : action.transitions) {
        if (t.prob == 0.0) continue;
        if (!(t.prob > 0.0)) negative = true;
        merged[t.target] += t.prob;
    }
    if (negative) return; // leave as given so validation can point at the entry
    action.transitions.clear();
    for (const auto& [target, prob] : merged) action.transitions.push_back({target, prob});
    const double m = action.mass();
    if (m > 1.0 && m <= 1.0 + kMassTolerance)
        for (auto& t : action.transitions) t.prob /= m;
}

namespace {

// Optimum over actions at s; 0 for final states.
template <class ValueOf>
double optimize(const State& state, ValueOf&& value_of) {
    if (state.actions.empty()) return 0.0;
    double best = value_of(0);
    for (std::size_t a = 1; a < state.actions.size(); ++a) {
        const double v = value_of(a);
        best = state.player == Player::Max ? std::max(best, v) : std::min(best, v);
    }
    return best;
}

} // namespace

double Action::mass() const {
    double m = 0.0;
    for (const auto& t : transitions) m += t.prob;
    return m;
}

InvalidModel::InvalidModel(std::vector<Violation> violations)
    : std::invalid_argument(summarize(violations)), violations_(std::move(violations)) {}

Ssg::Ssg(std::vector<State> states) : states_(std::move(states)) {
    for (auto& s : states_)
        for (auto& a : s.actions) canonicalize_action(a);
}

Ssg Ssg::checked(std::vector<State> states) {
    Ssg game(std::move(states));
    auto violations = validate_ssg(game);
    if (!violations.empty()) throw InvalidModel(std::move(violations));
    return game;
}

std::size_t Ssg::pair_count() const {
    std::size_t total = 0;
    for (const auto& s : states_) total += s.actions.size();
    return total;
}

bool Ssg::is_chain() const {
    return std::all_of(states_.begin(), states_.end(), [](const State& s) { return s.actions.size() <= 1; });
}

Ssg Ssg::with_scaled_rewards(double factor) const {
    Ssg copy = *this;
    for (auto& s : copy.states_)
        for (auto& a : s.actions) a.reward *= factor;
    return copy;
}

std::vector<Violation> validate_ssg(const Ssg& game) {
    std::vector<Violation> out;
    const std::size_t n = game.size();
    for (std::size_t s = 0; s < n; ++s) {
        const State& state = game.state(s);
        if (state.player != Player::Max && state.player != Player::Min)
            out.push_back({"states[" + std::to_string(s) + "].player", "player must be max or min"});
        for (std::size_t a = 0; a < state.actions.size(); ++a) {
            const Action& action = state.actions[a];
            const std::string path = action_path(s, a);
            if (!(action.reward >= 0.0) || !std::isfinite(action.reward))
                out.push_back({path + ".reward", "reward must be finite and >= 0, got " +
                                                     std::to_string(action.reward)});
            double mass = 0.0;
            bool mass_ok = true;
            for (std::size_t k = 0; k < action.transitions.size(); ++k) {
                const Transition& t = action.transitions[k];
                const std::string tpath = path + ".transitions[" + std::to_string(k) + "]";
                if (t.target >= n)
                    out.push_back({tpath, "target " + std::to_string(t.target) + " does not exist"});
                if (!(t.prob >= 0.0) || !std::isfinite(t.prob)) {
                    out.push_back({tpath, "probability must be finite and >= 0, got " + std::to_string(t.prob)});
                    mass_ok = false;
                }
                mass += t.prob;
            }
            if (mass_ok && mass > 1.0 + kMassTolerance)
                out.push_back({path, "outgoing probability mass " + std::to_string(mass) + " exceeds 1"});
        }
    }
    return out;
}

StateActionIndex::StateActionIndex(const Ssg& game) {
    offsets_.reserve(game.size() + 1);
    offsets_.push_back(0);
    for (std::size_t s = 0; s < game.size(); ++s) offsets_.push_back(offsets_.back() + game.action_count(s));
}

std::size_t StateActionIndex::index(std::size_t s, std::size_t a) const {
    if (s + 1 >= offsets_.size() || a >= offsets_[s + 1] - offsets_[s])
        throw std::out_of_range("no state-action pair (" + std::to_string(s) + ", " + std::to_string(a) + ")");
    return offsets_[s] + a;
}

std::pair<std::size_t, std::size_t> StateActionIndex::pair(std::size_t index) const {
    if (index >= size()) throw std::out_of_range("state-action index " + std::to_string(index) + " out of range");
    // first offset strictly greater than index belongs to state s+1
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), index);
    const std::size_t s = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    return {s, index - offsets_[s]};
}

double action_value(const Action& action, const ValueVector& v) {
    double total = action.reward;
    for (const auto& t : action.transitions) total += t.prob * v[t.target];
    return total;
}

double bellman_component(const Ssg& game, const ValueVector& v, std::size_t s) {
    const State& state = game.state(s);
    return optimize(state, [&](std::size_t a) { return action_value(state.actions[a], v); });
}

void bellman_apply_into(const Ssg& game, const ValueVector& v, ValueVector& out) {
    require_dimension("bellman_apply", game.size(), v.size());
    out.resize(game.size());
    for (std::size_t s = 0; s < game.size(); ++s) out[s] = bellman_component(game, v, s);
}

ValueVector bellman_apply(const Ssg& game, const ValueVector& v) {
    ValueVector out;
    bellman_apply_into(game, v, out);
    return out;
}

ValueVector state_action_bellman_apply(const Ssg& game, const ValueVector& q) {
    const StateActionIndex index(game);
    require_dimension("state_action_bellman_apply", index.size(), q.size());
    ValueVector best(game.size());
    for (std::size_t s = 0; s < game.size(); ++s)
        best[s] = optimize(game.state(s), [&](std::size_t a) { return q[index.offset(s) + a]; });
    ValueVector out(index.size());
    for (std::size_t s = 0; s < game.size(); ++s)
        for (std::size_t a = 0; a < game.action_count(s); ++a)
            out[index.offset(s) + a] = action_value(game.action(s, a), best);
    return out;
}

Ssg restrict_policy(const Ssg& game, const Policy& policy) {
    require_dimension("restrict_policy", game.size(), policy.choice.size());
    std::vector<State> states = game.states();
    for (std::size_t s = 0; s < states.size(); ++s) {
        if (!policy.choice[s]) continue;
        const std::size_t a = *policy.choice[s];
        if (a >= states[s].actions.size())
            throw std::invalid_argument("policy picks action " + std::to_string(a) + " not enabled in state " +
                                        std::to_string(s));
        Action kept = std::move(states[s].actions[a]);
        states[s].actions.clear();
        states[s].actions.push_back(std::move(kept));
    }
    return Ssg(std::move(states));
}

Ssg split_state_action(const Ssg& game) {
    const StateActionIndex index(game);
    const std::size_t n = game.size();
    std::vector<State> states(n + index.size());
    for (std::size_t s = 0; s < n; ++s) {
        states[s].player = game.state(s).player;
        for (std::size_t a = 0; a < game.action_count(s); ++a) {
            const std::size_t pair_state = n + index.offset(s) + a;
            states[s].actions.push_back(Action{0.0, {{pair_state, 1.0}}});
            State& p = states[pair_state];
            p.player = Player::Min;
            p.actions.push_back(game.action(s, a));
        }
    }
    return Ssg(std::move(states));
}

Operator k_step_operator(const Ssg& game, std::size_t k) {
    if (k == 0) throw std::invalid_argument("k_step_operator: k must be >= 1");
    return [game, k](const ValueVector& v) {
        ValueVector current = v;
        ValueVector next;
        for (std::size_t i = 0; i < k; ++i) {
            bellman_apply_into(game, current, next);
            current.swap(next);
        }
        return current;
    };
}

Operator bellman_operator(const Ssg& game) {
    return [game](const ValueVector& v) { return bellman_apply(game, v); };
}

const char* to_string(Player player) { return player == Player::Max ? "max" : "min"; }

} // namespace mannfix
