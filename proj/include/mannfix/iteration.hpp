#pragma once

#include "mannfix/scheme.hpp"
#include "mannfix/types.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mannfix {

/// Raised when an operator is evaluated at, or returns, a point outside its box.
class BoxViolation : public std::runtime_error {
public:
    BoxViolation(std::size_t step, const std::string& what)
        : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

/// n -> f_n on a declared 0-box.
///
/// The function is called exactly once per step, in increasing step order, by
/// every runner in this header, so stateful providers (e.g. ones that sample
/// before each step) are allowed.
class OperatorProvider {
public:
    using Fn = std::function<ValueVector(std::size_t n, const ValueVector& x)>;
    /// f_n(x)(i) only; lets single-component updates skip the full evaluation.
    using ComponentFn = std::function<double(std::size_t n, const ValueVector& x, std::size_t i)>;

    OperatorProvider(ZeroBox box, Fn fn, ComponentFn component = {});

    static OperatorProvider constant(Operator f, ZeroBox box);

    const ZeroBox& box() const { return box_; }
    std::size_t dimension() const { return box_.dimension(); }
    bool has_component() const { return static_cast<bool>(component_); }

    /// Evaluates f_n(x) and checks the result against the box.
    ValueVector operator()(std::size_t n, const ValueVector& x) const;
    double component(std::size_t n, const ValueVector& x, std::size_t i) const;

    /// Absolute slack for the output check on bounded components.
    static constexpr double kBoxSlack = 1e-9;

private:
    ZeroBox box_;
    Fn fn_;
    ComponentFn component_;
};

enum class Termination { MaxSteps, ChangeBelowThreshold, ErrorBelowThreshold };

std::string to_string(Termination reason);

struct StoppingRule {
    std::size_t max_steps = 1000;
    /// Stop once ||x_{n+1} - x_n|| < threshold.
    std::optional<double> change_threshold;
    /// Stop once the error against the reference is < threshold. Requires a reference.
    std::optional<double> error_threshold;
};

/// Which steps are stored: every step up to dense_until, then every stride-th
/// step; step 0 and the final step are always stored.
struct RecordOptions {
    std::size_t dense_until = 1000;
    std::size_t stride = 10;
    bool iterates = true;
};

/// Row k describes x_{steps[k]}.  alpha_min/beta_min are the minima of the
/// parameter vectors that produced it (NaN for step 0); for random chaotic
/// runs they are the selected component's parameters.
struct Trajectory {
    std::vector<std::size_t> steps;
    std::vector<ValueVector> iterates;
    std::vector<double> errors; ///< empty iff no reference was given
    std::vector<double> max_change;
    std::vector<double> alpha_min;
    std::vector<double> beta_min;
    std::vector<std::int64_t> selected; ///< updated component, -1 unless random chaotic

    ValueVector final_value;
    std::size_t steps_taken = 0;
    Termination reason = Termination::MaxSteps;

    std::size_t size() const { return steps.size(); }
};

/// Pointwise (1 - beta) * ((1 - alpha) * x + alpha * fx).
ValueVector mann_step(const ValueVector& x, const ValueVector& fx, const ValueVector& alpha,
                      const ValueVector& beta);

Trajectory iterate(const OperatorProvider& provider, const Scheme& scheme, const ValueVector& x0,
                   const StoppingRule& stop, const std::optional<ValueVector>& reference = std::nullopt,
                   const RecordOptions& record = {});

Trajectory iterate(const OperatorProvider& provider, const VectorScheme& scheme, const ValueVector& x0,
                   const StoppingRule& stop, const std::optional<ValueVector>& reference = std::nullopt,
                   const RecordOptions& record = {});

/// Updates only the components in I_n (using the vector scheme's values there)
/// and copies the rest.  Equal to `iterate` with VectorScheme::masked(scheme, index_sets).
Trajectory chaotic_iterate(const OperatorProvider& provider, const VectorScheme& scheme,
                           const IndexSetSequence& index_sets, const ValueVector& x0,
                           const StoppingRule& stop,
                           const std::optional<ValueVector>& reference = std::nullopt,
                           const RecordOptions& record = {});

/// One uniformly random component per step, parameters from `base` at that
/// component's local counter.
Trajectory random_chaotic_iterate(const OperatorProvider& provider, const Scheme& base,
                                  std::uint64_t seed, const ValueVector& x0, const StoppingRule& stop,
                                  const std::optional<ValueVector>& reference = std::nullopt,
                                  const RecordOptions& record = {});

/// F(x) = f(min(x, x_star)).
Operator clamp_extend(Operator f, ValueVector x_star);

struct KleeneResult {
    ValueVector value;
    bool converged = false;
    std::size_t steps = 0;
};

/// x_0 = 0, x_{n+1} = f(x_n) until the change drops below threshold or max_steps.
KleeneResult kleene_iterate(const Operator& f, std::size_t dimension, double threshold,
                            std::size_t max_steps);

} // namespace mannfix
