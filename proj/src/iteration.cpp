#include "mannfix/iteration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mannfix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// The single place where the update formula lives, so every runner produces
// bit-identical results for identical inputs.
inline double mann_component(double x, double fx, double alpha, double beta) {
    return (1.0 - beta) * ((1.0 - alpha) * x + alpha * fx);
}

double min_of(const ValueVector& v) { return v.empty() ? kNaN : *std::min_element(v.begin(), v.end()); }

void check_output(const ZeroBox& box, std::size_t n, std::size_t i, double value) {
    if (!std::isfinite(value) || value < 0.0 || value > box.bound[i] + OperatorProvider::kBoxSlack)
        throw BoxViolation(n, "f_n(x)(" + std::to_string(i) + ") = " + std::to_string(value) +
                                  " leaves the box");
}

struct StepOutcome {
    double alpha_min = kNaN;
    double beta_min = kNaN;
    std::int64_t selected = -1;
};

class Runner {
public:
    Runner(const OperatorProvider& provider, const ValueVector& x0, const StoppingRule& stop,
           const std::optional<ValueVector>& reference, const RecordOptions& record)
        : provider_(provider), stop_(stop), reference_(reference), record_(record) {
        require_dimension("iterate: x0", provider.dimension(), x0.size());
        if (!provider.box().contains(x0)) throw BoxViolation(0, "x0 is outside the box");
        if (reference_) require_dimension("iterate: reference", provider.dimension(), reference_->size());
        if (stop_.error_threshold && !reference_)
            throw std::invalid_argument("an error threshold needs a reference value");
        if (record_.stride == 0) throw std::invalid_argument("record stride must be >= 1");
    }

    template <class Step>
    Trajectory run(const ValueVector& x0, Step&& step) {
        ValueVector x = x0;
        ValueVector next(x.size());
        double error = current_error(x);
        push(0, x, error, kNaN, StepOutcome{});

        if (stop_.error_threshold && error < *stop_.error_threshold) {
            traj_.reason = Termination::ErrorBelowThreshold;
            traj_.final_value = std::move(x);
            return std::move(traj_);
        }

        for (std::size_t n = 0; n < stop_.max_steps; ++n) {
            const StepOutcome outcome = step(n, x, next);
            const double change = sup_distance(next, x);
            x.swap(next);
            error = current_error(x);
            const std::size_t done = n + 1;

            bool stopped = false;
            if (stop_.change_threshold && change < *stop_.change_threshold) {
                traj_.reason = Termination::ChangeBelowThreshold;
                stopped = true;
            } else if (stop_.error_threshold && error < *stop_.error_threshold) {
                traj_.reason = Termination::ErrorBelowThreshold;
                stopped = true;
            }
            traj_.steps_taken = done;
            if (stopped || done == stop_.max_steps || wanted(done)) push(done, x, error, change, outcome);
            if (stopped) break;
        }
        traj_.final_value = std::move(x);
        return std::move(traj_);
    }

private:
    double current_error(const ValueVector& x) const {
        return reference_ ? error_vs_reference(x, *reference_) : kNaN;
    }

    bool wanted(std::size_t step) const {
        return step <= record_.dense_until || step % record_.stride == 0;
    }

    void push(std::size_t step, const ValueVector& x, double error, double change, const StepOutcome& o) {
        traj_.steps.push_back(step);
        if (record_.iterates) traj_.iterates.push_back(x);
        if (reference_) traj_.errors.push_back(error);
        traj_.max_change.push_back(change);
        traj_.alpha_min.push_back(o.alpha_min);
        traj_.beta_min.push_back(o.beta_min);
        traj_.selected.push_back(o.selected);
    }

    const OperatorProvider& provider_;
    const StoppingRule& stop_;
    const std::optional<ValueVector>& reference_;
    const RecordOptions& record_;
    Trajectory traj_;
};

} // namespace

OperatorProvider::OperatorProvider(ZeroBox box, Fn fn, ComponentFn component)
    : box_(std::move(box)), fn_(std::move(fn)), component_(std::move(component)) {
    if (box_.dimension() == 0) throw std::invalid_argument("operator provider needs dimension >= 1");
    if (!fn_) throw std::invalid_argument("operator provider needs a function");
}

OperatorProvider OperatorProvider::constant(Operator f, ZeroBox box) {
    return OperatorProvider(std::move(box), [f = std::move(f)](std::size_t, const ValueVector& x) { return f(x); });
}

ValueVector OperatorProvider::operator()(std::size_t n, const ValueVector& x) const {
    ValueVector out = fn_(n, x);
    if (out.size() != box_.dimension())
        throw BoxViolation(n, "f_n returned dimension " + std::to_string(out.size()) + ", expected " +
                                  std::to_string(box_.dimension()));
    for (std::size_t i = 0; i < out.size(); ++i) check_output(box_, n, i, out[i]);
    return out;
}

double OperatorProvider::component(std::size_t n, const ValueVector& x, std::size_t i) const {
    const double value = component_ ? component_(n, x, i) : fn_(n, x).at(i);
    check_output(box_, n, i, value);
    return value;
}

std::string to_string(Termination reason) {
    switch (reason) {
    case Termination::MaxSteps: return "max-steps";
    case Termination::ChangeBelowThreshold: return "change-below-threshold";
    case Termination::ErrorBelowThreshold: return "error-below-threshold";
    }
    return "?";
}

ValueVector mann_step(const ValueVector& x, const ValueVector& fx, const ValueVector& alpha,
                      const ValueVector& beta) {
    require_dimension("mann_step: fx", x.size(), fx.size());
    require_dimension("mann_step: alpha", x.size(), alpha.size());
    require_dimension("mann_step: beta", x.size(), beta.size());
    ValueVector out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = mann_component(x[i], fx[i], alpha[i], beta[i]);
    return out;
}

Trajectory iterate(const OperatorProvider& provider, const Scheme& scheme, const ValueVector& x0,
                   const StoppingRule& stop, const std::optional<ValueVector>& reference,
                   const RecordOptions& record) {
    return iterate(provider, VectorScheme::broadcast(scheme, provider.dimension()), x0, stop, reference,
                   record);
}

Trajectory iterate(const OperatorProvider& provider, const VectorScheme& scheme, const ValueVector& x0,
                   const StoppingRule& stop, const std::optional<ValueVector>& reference,
                   const RecordOptions& record) {
    require_dimension("iterate: scheme", provider.dimension(), scheme.dimension());
    Runner runner(provider, x0, stop, reference, record);
    ValueVector alpha, beta;
    return runner.run(x0, [&](std::size_t n, const ValueVector& x, ValueVector& next) {
        scheme.eval_into(n, alpha, beta);
        const ValueVector fx = provider(n, x);
        for (std::size_t i = 0; i < x.size(); ++i) next[i] = mann_component(x[i], fx[i], alpha[i], beta[i]);
        return StepOutcome{min_of(alpha), min_of(beta), -1};
    });
}

Trajectory chaotic_iterate(const OperatorProvider& provider, const VectorScheme& scheme,
                           const IndexSetSequence& index_sets, const ValueVector& x0,
                           const StoppingRule& stop, const std::optional<ValueVector>& reference,
                           const RecordOptions& record) {
    const std::size_t d = provider.dimension();
    require_dimension("chaotic_iterate: scheme", d, scheme.dimension());
    Runner runner(provider, x0, stop, reference, record);
    ValueVector alpha, beta;
    std::vector<char> active(d);
    return runner.run(x0, [&](std::size_t n, const ValueVector& x, ValueVector& next) {
        scheme.eval_into(n, alpha, beta);
        const IndexSet set = index_sets(n);
        check_index_set(set, d);
        std::fill(active.begin(), active.end(), 0);
        for (auto j : set) active[j] = 1;
        const ValueVector fx = provider(n, x);
        for (std::size_t j = 0; j < d; ++j) {
            if (active[j]) {
                next[j] = mann_component(x[j], fx[j], alpha[j], beta[j]);
            } else {
                next[j] = x[j];
                alpha[j] = beta[j] = 0.0;
            }
        }
        return StepOutcome{min_of(alpha), min_of(beta), -1};
    });
}

Trajectory random_chaotic_iterate(const OperatorProvider& provider, const Scheme& base, std::uint64_t seed,
                                  const ValueVector& x0, const StoppingRule& stop,
                                  const std::optional<ValueVector>& reference, const RecordOptions& record) {
    const std::size_t d = provider.dimension();
    Runner runner(provider, x0, stop, reference, record);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, d - 1);
    std::vector<std::size_t> counters(d, 0);
    return runner.run(x0, [&](std::size_t n, const ValueVector& x, ValueVector& next) {
        const std::size_t i = pick(rng);
        const auto [a, b] = base(counters[i]);
        ++counters[i];
        const double fxi = provider.component(n, x, i);
        next = x;
        next[i] = mann_component(x[i], fxi, a, b);
        return StepOutcome{a, b, static_cast<std::int64_t>(i)};
    });
}

Operator clamp_extend(Operator f, ValueVector x_star) {
    return [f = std::move(f), x_star = std::move(x_star)](const ValueVector& x) {
        require_dimension("clamp_extend", x_star.size(), x.size());
        ValueVector clamped(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) clamped[i] = std::min(x[i], x_star[i]);
        return f(clamped);
    };
}

KleeneResult kleene_iterate(const Operator& f, std::size_t dimension, double threshold,
                            std::size_t max_steps) {
    KleeneResult result;
    result.value.assign(dimension, 0.0);
    for (std::size_t step = 1; step <= max_steps; ++step) {
        ValueVector next = f(result.value);
        require_dimension("kleene_iterate", dimension, next.size());
        const double change = sup_distance(next, result.value);
        result.value = std::move(next);
        result.steps = step;
        if (change < threshold) {
            result.converged = true;
            break;
        }
    }
    return result;
}

} // namespace mannfix
