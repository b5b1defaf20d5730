#include "mannfix/analysis.hpp"

#include "mannfix/iteration.hpp"

#include <Eigen/Dense>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/strong_components.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace mannfix {

namespace {

using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS>;

constexpr double kResidualTolerance = 1e-9;
constexpr double kFallbackThreshold = 1e-12;
constexpr std::size_t kFallbackBudget = 10'000'000;
constexpr double kUnboundedSampleRange = 10.0;

void require_chain(const Ssg& game, const char* where) {
    if (!game.is_chain()) throw std::invalid_argument(std::string(where) + ": input has states with choices");
}

double reward_of(const Ssg& chain, std::size_t s) {
    return chain.state(s).is_final() ? 0.0 : chain.action(s, 0).reward;
}

// Marks every state that can reach one of the seeds (seeds included).
std::vector<bool> backward_reach(const std::vector<std::vector<std::size_t>>& predecessors,
                                 const std::vector<bool>& seeds) {
    std::vector<bool> hit = seeds;
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < seeds.size(); ++s)
        if (seeds[s]) queue.push_back(s);
    while (!queue.empty()) {
        const std::size_t t = queue.front();
        queue.pop_front();
        for (auto p : predecessors[t])
            if (!hit[p]) {
                hit[p] = true;
                queue.push_back(p);
            }
    }
    return hit;
}

bool same_value(double a, double b) {
    if (a == b) return true;
    if (std::isinf(a) || std::isinf(b)) return false;
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a));
}

bool same_vector(const ValueVector& a, const ValueVector& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_value(a[i], b[i])) return false;
    return true;
}

// Mixed-radix odometer over the action choices of a set of states.
class PolicyOdometer {
public:
    PolicyOdometer(const Ssg& game, std::vector<std::size_t> states) : game_(game), states_(std::move(states)) {
        digits_.assign(states_.size(), 0);
    }

    void apply(Policy& policy) const {
        for (std::size_t k = 0; k < states_.size(); ++k) policy.choice[states_[k]] = digits_[k];
    }

    // Advances lexicographically with the lowest state index most significant.
    bool next() {
        for (std::size_t k = states_.size(); k-- > 0;) {
            if (++digits_[k] < game_.action_count(states_[k])) return true;
            digits_[k] = 0;
        }
        return false;
    }

    void reset() { std::fill(digits_.begin(), digits_.end(), 0); }

private:
    const Ssg& game_;
    std::vector<std::size_t> states_;
    std::vector<std::size_t> digits_;
};

} // namespace

const char* to_string(StateClass label) {
    switch (label) {
    case StateClass::Zero: return "zero";
    case StateClass::Infinite: return "infinite";
    case StateClass::Finite: return "finite";
    }
    return "?";
}

const char* to_string(ValueMethod method) {
    switch (method) {
    case ValueMethod::ChainSolve: return "chain-solve";
    case ValueMethod::PolicyEnumeration: return "policy-enumeration";
    case ValueMethod::Kleene: return "kleene";
    }
    return "?";
}

Classification classify_chain(const Ssg& chain) {
    require_chain(chain, "classify_chain");
    const std::size_t n = chain.size();
    Graph graph(n);
    std::vector<std::vector<std::size_t>> predecessors(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (chain.state(s).is_final()) continue;
        for (const auto& t : chain.action(s, 0).transitions) {
            boost::add_edge(s, t.target, graph);
            predecessors[t.target].push_back(s);
        }
    }

    std::vector<int> component(n);
    const int count = n == 0 ? 0 : boost::strong_components(graph, component.data());

    std::vector<bool> closed(count, true);
    for (std::size_t s = 0; s < n; ++s) {
        const bool full = !chain.state(s).is_final() && chain.action(s, 0).mass() >= 1.0 - kMassTolerance;
        if (!full) closed[component[s]] = false;
        if (chain.state(s).is_final()) continue;
        for (const auto& t : chain.action(s, 0).transitions)
            if (component[t.target] != component[s]) closed[component[s]] = false;
    }

    Classification result;
    result.essential.resize(n);
    std::vector<bool> positive(n);
    for (std::size_t s = 0; s < n; ++s) {
        result.essential[s] = closed[component[s]];
        positive[s] = reward_of(chain, s) > 0.0;
    }
    const std::vector<bool> reaches_reward = backward_reach(predecessors, positive);

    // An essential state outside S0 reaches a positive reward; since nothing
    // leaves its component, that reward lies in the same component.
    std::vector<bool> divergent_seed(n);
    for (std::size_t s = 0; s < n; ++s) divergent_seed[s] = result.essential[s] && reaches_reward[s];
    const std::vector<bool> reaches_divergent = backward_reach(predecessors, divergent_seed);

    result.labels.resize(n);
    for (std::size_t s = 0; s < n; ++s) {
        if (!reaches_reward[s])
            result.labels[s] = StateClass::Zero;
        else if (reaches_divergent[s])
            result.labels[s] = StateClass::Infinite;
        else
            result.labels[s] = StateClass::Finite;
    }
    return result;
}

ExactValue exact_chain_value(const Ssg& chain, ChainSolver solver) {
    const Classification cls = classify_chain(chain);
    const std::size_t n = chain.size();
    ExactValue result;
    result.method = ChainSolver::Linear == solver ? ValueMethod::ChainSolve : ValueMethod::Kleene;
    result.value.assign(n, 0.0);

    std::vector<std::size_t> finite;
    std::vector<std::ptrdiff_t> slot(n, -1);
    for (std::size_t s = 0; s < n; ++s) {
        if (cls.labels[s] == StateClass::Infinite) result.value[s] = kInfinity;
        if (cls.labels[s] == StateClass::Finite) {
            slot[s] = static_cast<std::ptrdiff_t>(finite.size());
            finite.push_back(s);
        }
    }
    if (finite.empty()) return result;

    const auto m = static_cast<Eigen::Index>(finite.size());
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const std::size_t s = finite[static_cast<std::size_t>(i)];
        const Action& action = chain.action(s, 0); // finite states are never final
        rhs(i) = action.reward;
        // Successors outside the finite class are zero states (an infinite
        // successor would make s infinite), so they contribute nothing.
        for (const auto& t : action.transitions)
            if (slot[t.target] >= 0) system(i, slot[t.target]) -= t.prob;
    }

    bool solved = false;
    Eigen::VectorXd v;
    if (solver == ChainSolver::Linear) {
        v = system.partialPivLu().solve(rhs);
        const double residual = (system * v - rhs).lpNorm<Eigen::Infinity>();
        solved = v.allFinite() && residual <= kResidualTolerance;
    }
    if (!solved) {
        result.method = ValueMethod::Kleene;
        const Eigen::MatrixXd transfer = Eigen::MatrixXd::Identity(m, m) - system;
        v = Eigen::VectorXd::Zero(m);
        for (std::size_t step = 0; step < kFallbackBudget; ++step) {
            Eigen::VectorXd next = rhs + transfer * v;
            const double change = (next - v).lpNorm<Eigen::Infinity>();
            v.swap(next);
            if (change < kFallbackThreshold) break;
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) result.value[finite[static_cast<std::size_t>(i)]] = std::max(0.0, v(i));
    return result;
}

BudgetExceeded::BudgetExceeded(double joint_policies, std::size_t budget)
    : std::runtime_error("policy enumeration needs " + std::to_string(joint_policies) +
                         " joint policies, budget is " + std::to_string(budget)),
      joint_policies_(joint_policies) {}

double joint_policy_count(const Ssg& game) {
    double count = 1.0;
    for (std::size_t s = 0; s < game.size(); ++s)
        if (!game.state(s).is_final()) count *= static_cast<double>(game.action_count(s));
    return count;
}

ExactValue exact_ssg_value(const Ssg& game, std::size_t budget) {
    const double joint = joint_policy_count(game);
    if (joint > static_cast<double>(budget)) throw BudgetExceeded(joint, budget);

    const std::size_t n = game.size();
    std::vector<std::size_t> min_states, max_states;
    for (std::size_t s = 0; s < n; ++s) {
        if (game.state(s).is_final()) continue;
        (game.state(s).player == Player::Min ? min_states : max_states).push_back(s);
    }

    PolicyOdometer min_odo(game, min_states);
    PolicyOdometer max_odo(game, max_states);
    Policy joint_policy = Policy::empty(n);

    auto chain_value = [&]() {
        min_odo.apply(joint_policy);
        max_odo.apply(joint_policy);
        return exact_chain_value(restrict_policy(game, joint_policy)).value;
    };

    // Pass 1: best MAX response per MIN policy, then the pointwise minimum.
    std::vector<ValueVector> responses;
    ValueVector value(n, kInfinity);
    do {
        ValueVector best(n, 0.0);
        max_odo.reset();
        do {
            const ValueVector v = chain_value();
            for (std::size_t s = 0; s < n; ++s) best[s] = std::max(best[s], v[s]);
        } while (max_odo.next());
        for (std::size_t s = 0; s < n; ++s) value[s] = std::min(value[s], best[s]);
        responses.push_back(std::move(best));
    } while (min_odo.next());

    ExactValue result;
    result.method = ValueMethod::PolicyEnumeration;
    result.value = value;

    // Pass 2: the first MIN policy whose best response attains the value
    // everywhere, and the first MAX policy attaining that response.
    min_odo.reset();
    for (const auto& response : responses) {
        if (same_vector(response, value)) {
            Policy min_policy = Policy::empty(n);
            min_odo.apply(min_policy);
            max_odo.reset();
            do {
                if (same_vector(chain_value(), response)) {
                    Policy max_policy = Policy::empty(n);
                    max_odo.apply(max_policy);
                    result.min_policy = std::move(min_policy);
                    result.max_policy = std::move(max_policy);
                    break;
                }
            } while (max_odo.next());
            break;
        }
        min_odo.next();
    }
    return result;
}

Operator sup_envelope(std::vector<Operator> ops) {
    if (ops.empty()) throw std::invalid_argument("sup_envelope needs at least one operator");
    return [ops = std::move(ops)](const ValueVector& x) {
        ValueVector out = ops.front()(x);
        for (std::size_t k = 1; k < ops.size(); ++k) {
            const ValueVector y = ops[k](x);
            require_dimension("sup_envelope", out.size(), y.size());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], y[i]);
        }
        return out;
    };
}

PropertyReport check_operator_properties(const Operator& f, const ZeroBox& box, std::size_t samples,
                                         std::uint64_t seed, double slack) {
    if (samples == 0) throw std::invalid_argument("check_operator_properties needs samples >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t d = box.dimension();

    auto draw = [&] {
        ValueVector x(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double hi = std::isinf(box.bound[i]) ? kUnboundedSampleRange : box.bound[i];
            x[i] = unit(rng) * hi;
        }
        return x;
    };

    PropertyReport report;
    report.samples = samples;
    auto lipschitz = [&](const ValueVector& x, const ValueVector& y, const ValueVector& fx, const ValueVector& fy) {
        const double dx = sup_distance(x, y);
        if (dx == 0.0) return;
        const double ratio = sup_distance(fx, fy) / dx;
        if (ratio > report.max_lipschitz_ratio) {
            report.max_lipschitz_ratio = ratio;
            report.lipschitz_witness = std::make_pair(x, y);
        }
    };

    for (std::size_t k = 0; k < samples; ++k) {
        const ValueVector x = draw();
        const ValueVector y = draw();
        ValueVector lo(d), hi(d);
        for (std::size_t i = 0; i < d; ++i) {
            lo[i] = std::min(x[i], y[i]);
            hi[i] = std::max(x[i], y[i]);
        }
        const ValueVector fx = f(x), fy = f(y), flo = f(lo), fhi = f(hi);
        bool ordered = true;
        for (std::size_t i = 0; i < flo.size(); ++i)
            if (flo[i] > fhi[i] + slack) ordered = false;
        if (!ordered) {
            if (!report.monotonicity_witness) report.monotonicity_witness = std::make_pair(lo, hi);
            ++report.monotonicity_violations;
        }
        lipschitz(x, y, fx, fy);
        lipschitz(lo, hi, flo, fhi);
    }
    return report;
}

} // namespace mannfix
