#pragma once

#include "mannfix/ssg.hpp"
#include "mannfix/types.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mannfix {

enum class StateClass {
    Zero,     ///< only zero-reward states reachable: value 0
    Infinite, ///< reaches an essential state with a reachable positive reward: value +inf
    Finite,   ///< everything else: finite positive value
};

const char* to_string(StateClass label);

struct Classification {
    std::vector<StateClass> labels;
    std::vector<bool> essential;
};

/// Structural classification of a Markov chain (|A(s)| <= 1). Throws
/// std::invalid_argument for games with choices.
///
/// A strongly connected component is essential iff no edge leaves it and each
/// member has full outgoing mass (>= 1 - kMassTolerance).
Classification classify_chain(const Ssg& chain);

enum class ValueMethod { ChainSolve, PolicyEnumeration, Kleene };
enum class ChainSolver { Linear, Kleene };

const char* to_string(ValueMethod method);

struct ExactValue {
    ValueVector value;          ///< +inf entries allowed
    std::optional<Policy> min_policy;
    std::optional<Policy> max_policy;
    ValueMethod method = ValueMethod::ChainSolve;
};

/// 0 on the zero class, +inf on the infinite class, and the least solution
/// of v = R + T v restricted to the finite class elsewhere.  The linear solve
/// is checked by its residual (1e-9) and falls back to Kleene iteration at
/// threshold 1e-12 if the check fails.
ExactValue exact_chain_value(const Ssg& chain, ChainSolver solver = ChainSolver::Linear);

class BudgetExceeded : public std::runtime_error {
public:
    BudgetExceeded(double joint_policies, std::size_t budget);
    double joint_policies() const { return joint_policies_; }

private:
    double joint_policies_;
};

/// Number of joint memoryless deterministic policies, i.e. the product of
/// |A(s)| over non-final states (as a double; may be huge).
double joint_policy_count(const Ssg& game);

/// min over MIN policies of max over MAX policies of the chain value, pointwise.
/// Policies are enumerated lexicographically (state 0 most significant, lowest
/// action first); the witnesses are the first ones attaining the optimum.
ExactValue exact_ssg_value(const Ssg& game, std::size_t budget = 1'000'000);

/// x -> pointwise max of ops[i](x).  Diagnostic only: used with Kleene on a
/// finite tail window f_n..f_N as a stand-in for the supremum over a tail.
Operator sup_envelope(std::vector<Operator> ops);

struct PropertyReport {
    std::size_t samples = 0;
    std::size_t monotonicity_violations = 0;
    std::optional<std::pair<ValueVector, ValueVector>> monotonicity_witness; ///< x <= y with f(x) !<= f(y)
    double max_lipschitz_ratio = 0.0;
    std::optional<std::pair<ValueVector, ValueVector>> lipschitz_witness;

    bool monotone() const { return monotonicity_violations == 0; }
    bool non_expansive(double slack = 1e-12) const { return max_lipschitz_ratio <= 1.0 + slack; }
};

/// Random pairs in the box; unbounded components are sampled from [0, 10].
/// Ordered pairs come from the pointwise min/max of each drawn pair.
PropertyReport check_operator_properties(const Operator& f, const ZeroBox& box, std::size_t samples,
                                         std::uint64_t seed, double slack = 1e-12);

} // namespace mannfix
