#include "mannfix/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <stdexcept>

namespace mannfix {

namespace {

std::string pair_path(std::size_t s, std::size_t a) {
    return "states[" + std::to_string(s) + "].actions[" + std::to_string(a) + "]";
}

} // namespace

StructuralPrior::StructuralPrior(const Ssg& truth) : index_(truth) {
    players_.reserve(truth.size());
    pairs_.reserve(index_.size());
    for (std::size_t s = 0; s < truth.size(); ++s) {
        players_.push_back(truth.state(s).player);
        for (const auto& action : truth.state(s).actions) {
            PairPrior p;
            for (const auto& t : action.transitions)
                if (t.prob > 0.0) p.support.push_back(t.target);
            std::sort(p.support.begin(), p.support.end());
            p.support.erase(std::unique(p.support.begin(), p.support.end()), p.support.end());
            p.terminating = action.mass() < 1.0 - kMassTolerance;
            p.reward_positive = action.reward > 0.0;
            pairs_.push_back(std::move(p));
        }
    }
}

SamplerState SamplerState::initial(const StructuralPrior& prior) {
    SamplerState state;
    state.pairs.resize(prior.pair_count());
    for (std::size_t i = 0; i < prior.pair_count(); ++i) state.pairs[i].successor.assign(prior.pair(i).support.size(), 0);
    return state;
}

void observe_step(SamplerState& state, const StructuralPrior& prior, const Ssg& truth, std::size_t s,
                  std::size_t a, Rng& rng, const RewardNoise& noise) {
    const std::size_t i = prior.index().index(s, a);
    const Action& action = truth.action(s, a);
    const PairPrior& pp = prior.pair(i);
    PairCounts& counts = state.pairs[i];

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    if (!pp.terminating) u *= action.mass(); // a sure action never terminates, whatever the rounding

    std::size_t hit = pp.support.size();
    double cumulative = 0.0;
    for (const auto& t : action.transitions) {
        cumulative += t.prob;
        if (u < cumulative) {
            hit = static_cast<std::size_t>(
                std::lower_bound(pp.support.begin(), pp.support.end(), t.target) - pp.support.begin());
            break;
        }
    }
    if (hit == pp.support.size() && !pp.terminating && !pp.support.empty()) hit = pp.support.size() - 1;

    if (hit < pp.support.size())
        ++counts.successor[hit];
    else
        ++counts.termination;
    ++counts.total;
    ++state.steps;

    if (!counts.reward_observed) {
        counts.reward_observed = true;
        counts.reward = action.reward;
        if (noise && pp.reward_positive) counts.reward = std::max(0.0, noise(action.reward, rng));
    }
}

void batch_observe(SamplerState& state, const StructuralPrior& prior, const Ssg& truth, std::size_t k, Rng& rng,
                   const RewardNoise& noise) {
    if (k == 0) return;
    if (prior.pair_count() == 0) throw std::invalid_argument("batch_observe: the model has no actions");
    std::uniform_int_distribution<std::size_t> pick(0, prior.pair_count() - 1);
    for (std::size_t j = 0; j < k; ++j) {
        const auto [s, a] = prior.index().pair(pick(rng));
        observe_step(state, prior, truth, s, a, rng, noise);
    }
}

std::vector<Transition> empirical_transitions(const PairCounts& counts, const PairPrior& prior) {
    std::vector<Transition> out;
    const std::size_t k = prior.support.size();
    out.reserve(k);
    if (counts.total == 0) {
        if (k == 0) return out;
        const double share = 1.0 / static_cast<double>(prior.terminating ? k + 1 : k);
        for (auto target : prior.support) out.push_back({target, share});
        return out;
    }
    const double total = static_cast<double>(counts.total);
    for (std::size_t j = 0; j < k; ++j)
        if (counts.successor[j] > 0)
            out.push_back({prior.support[j], static_cast<double>(counts.successor[j]) / total});
    return out;
}

double empirical_reward(const PairCounts& counts, const PairPrior& prior) {
    return prior.reward_positive && counts.reward_observed ? counts.reward : 0.0;
}

Ssg empirical_ssg(const SamplerState& state, const StructuralPrior& prior) {
    std::vector<State> states(prior.state_count());
    for (std::size_t s = 0; s < states.size(); ++s) {
        states[s].player = prior.player(s);
        for (std::size_t a = 0; a < prior.action_count(s); ++a) {
            const std::size_t i = prior.index().offset(s) + a;
            // Non-terminating pairs never record termination, so their mass is full.
            if (!prior.pair(i).terminating && state.pairs[i].termination != 0)
                throw std::logic_error("termination observed for a non-terminating pair");
            states[s].actions.push_back(
                Action{empirical_reward(state.pairs[i], prior.pair(i)), empirical_transitions(state.pairs[i], prior.pair(i))});
        }
    }
    return Ssg(std::move(states));
}

std::vector<Violation> sampling_validity_check(const Ssg& sampled, const StructuralPrior& prior, const Ssg& truth) {
    std::vector<Violation> out;
    if (sampled.size() != truth.size()) {
        out.push_back({"states", "state count differs from the true model"});
        return out;
    }
    for (std::size_t s = 0; s < truth.size(); ++s) {
        const std::string spath = "states[" + std::to_string(s) + "]";
        if (sampled.state(s).player != truth.state(s).player)
            out.push_back({spath + ".player", "player differs from the true model"});
        if (sampled.action_count(s) != truth.action_count(s)) {
            out.push_back({spath + ".actions", "action count differs from the true model"});
            continue;
        }
        for (std::size_t a = 0; a < truth.action_count(s); ++a) {
            const PairPrior& pp = prior.pair(prior.index().index(s, a));
            const Action& act = sampled.action(s, a);
            const std::string path = pair_path(s, a);
            for (const auto& t : act.transitions)
                if (t.prob > 0.0 && !std::binary_search(pp.support.begin(), pp.support.end(), t.target))
                    out.push_back({path, "mass on successor " + std::to_string(t.target) +
                                             " which is not a true transition"});
            if (!pp.reward_positive && act.reward != 0.0)
                out.push_back({path + ".reward", "reward sampled where the true reward is 0"});
            if (!pp.terminating && act.mass() < 1.0 - kMassTolerance)
                out.push_back({path, "termination mass on a non-terminating action"});
            if (act.mass() > 1.0 + kMassTolerance) out.push_back({path, "mass exceeds 1"});
        }
    }
    return out;
}

Sampler::Sampler(Ssg truth)
    : truth_(std::move(truth)), prior_(truth_), state_(SamplerState::initial(prior_)),
      cache_(prior_.pair_count()), stale_(prior_.pair_count(), 1) {}

void Sampler::observe(std::size_t s, std::size_t a, Rng& rng) {
    observe_step(state_, prior_, truth_, s, a, rng, noise_);
    stale_[prior_.index().index(s, a)] = 1;
}

void Sampler::batch_observe(std::size_t k, Rng& rng) {
    if (k == 0) return;
    if (prior_.pair_count() == 0) throw std::invalid_argument("batch_observe: the model has no actions");
    std::uniform_int_distribution<std::size_t> pick(0, prior_.pair_count() - 1);
    for (std::size_t j = 0; j < k; ++j) {
        const auto [s, a] = prior_.index().pair(pick(rng));
        observe(s, a, rng);
    }
}

void Sampler::refresh(std::size_t i) const {
    if (!stale_[i]) return;
    Action action{empirical_reward(state_.pairs[i], prior_.pair(i)),
                  empirical_transitions(state_.pairs[i], prior_.pair(i))};
    canonicalize_action(action);
    cache_[i] = std::move(action);
    stale_[i] = 0;
}

Ssg Sampler::empirical_ssg() const { return mannfix::empirical_ssg(state_, prior_); }

double Sampler::empirical_bellman_component(const ValueVector& x, std::size_t s) const {
    const std::size_t count = prior_.action_count(s);
    if (count == 0) return 0.0;
    const std::size_t first = prior_.index().offset(s);
    refresh(first);
    double best = action_value(cache_[first], x);
    for (std::size_t a = 1; a < count; ++a) {
        refresh(first + a);
        const double v = action_value(cache_[first + a], x);
        best = prior_.player(s) == Player::Max ? std::max(best, v) : std::min(best, v);
    }
    return best;
}

ValueVector Sampler::empirical_bellman_apply(const ValueVector& x) const {
    require_dimension("empirical_bellman_apply", prior_.state_count(), x.size());
    ValueVector out(x.size());
    for (std::size_t s = 0; s < x.size(); ++s) out[s] = empirical_bellman_component(x, s);
    return out;
}

std::string Sampler::counts_to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (std::size_t i = 0; i < state_.pairs.size(); ++i) {
        const auto& c = state_.pairs[i];
        const auto [s, a] = prior_.index().pair(i);
        pairs.push_back({{"state", s},
                         {"action", a},
                         {"successors", c.successor},
                         {"termination", c.termination},
                         {"total", c.total},
                         {"reward", c.reward},
                         {"reward_observed", c.reward_observed}});
    }
    return nlohmann::json{{"steps", state_.steps}, {"pairs", pairs}}.dump(2);
}

void Sampler::load_counts_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text);
    SamplerState loaded = SamplerState::initial(prior_);
    const auto& pairs = doc.at("pairs");
    if (pairs.size() != loaded.pairs.size()) throw std::invalid_argument("counts sidecar does not match the model");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& node = pairs[i];
        PairCounts& c = loaded.pairs[i];
        if (node.at("state").get<std::size_t>() != prior_.index().pair(i).first ||
            node.at("action").get<std::size_t>() != prior_.index().pair(i).second)
            throw std::invalid_argument("counts sidecar pair order does not match the model");
        c.successor = node.at("successors").get<std::vector<std::uint64_t>>();
        c.termination = node.at("termination").get<std::uint64_t>();
        c.total = node.at("total").get<std::uint64_t>();
        c.reward = node.at("reward").get<double>();
        c.reward_observed = node.at("reward_observed").get<bool>();
        std::uint64_t sum = c.termination;
        for (auto v : c.successor) sum += v;
        if (c.successor.size() != prior_.pair(i).support.size() || sum != c.total ||
            (c.termination > 0 && !prior_.pair(i).terminating))
            throw std::invalid_argument("counts sidecar is inconsistent at pair " + std::to_string(i));
    }
    loaded.steps = doc.at("steps").get<std::uint64_t>();
    state_ = std::move(loaded);
    std::fill(stale_.begin(), stale_.end(), 1);
}

} // namespace mannfix
