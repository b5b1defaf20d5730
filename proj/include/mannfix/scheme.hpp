#pragma once

#include "mannfix/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace mannfix {

// Step indexing: iterations run n = 0, 1, 2, ...  Families written with 1/n
// are evaluated at n + 1, so `harmonic` yields 1, 1/2, 1/3, ... which is then
// capped at kAlmostOne to keep every emitted value in [0,1).

enum class FamilyKind {
    OneMinusInverse, ///< 1 - 1/(n+1)
    Constant,        ///< c in [0,1)
    InversePower,    ///< 1/(n+1)^e
    UniformRandom,   ///< U[0,1) keyed by (seed, n)
    Harmonic,        ///< 1/(n+1)
    Zero,
    Synthesized,     ///< produced by synthesize_scheme
};

/// Declared analytic properties of a parameter sequence. Never inferred from
/// finite prefixes.
struct SequenceFlags {
    bool to_zero = false;
    bool sum_diverges = false;
};

class Scheme;

namespace detail {
class SynthesisTable;
}

/// One parameter sequence of a Mann scheme.
class SchemeFamily {
public:
    static SchemeFamily one_minus_inverse();
    static SchemeFamily constant(double c);
    static SchemeFamily inverse_power(double exponent);
    static SchemeFamily uniform(std::uint64_t seed);
    static SchemeFamily harmonic();
    static SchemeFamily zero();

    /// Parses one family token, e.g. "const:0.5", "inv-pow:0.5", "harmonic".
    /// `synth` is only accepted through Scheme::parse.
    static SchemeFamily parse(const std::string& token);

    FamilyKind kind() const { return kind_; }
    double parameter() const { return parameter_; }
    std::uint64_t seed() const { return seed_; }
    SequenceFlags flags() const;

    /// Value at 0-based step n, always in [0,1). Pure.
    double operator()(std::size_t n) const;

    std::string to_string() const;

private:
    friend class Scheme;
    friend Scheme synthesize_scheme(std::function<double(std::size_t)> eps);

    SchemeFamily(FamilyKind kind, double parameter) : kind_(kind), parameter_(parameter) {}

    FamilyKind kind_;
    double parameter_ = 0.0;
    std::uint64_t seed_ = 0;
    std::shared_ptr<const detail::SynthesisTable> table_;
    bool beta_role_ = false;
};

struct SchemeFlags {
    bool beta_to_zero = false;
    bool beta_sum_diverges = false;
    bool progressing = false;
};

/// A (dampened) Mann scheme: learning rates alpha_n and dampening factors beta_n.
class Scheme {
public:
    Scheme(SchemeFamily alpha, SchemeFamily beta);

    /// Grammar: `alpha=<family>[:<param>],beta=<family>[:<param>]` with
    /// families one-minus-inv, const:<c>, inv-pow:<e>, uniform:<seed>,
    /// harmonic, zero, synth[:<p>].  `synth` must appear on both sides and
    /// builds the scheme adapted to eps(n) = 1/n^p (p defaults to 1).
    static Scheme parse(const std::string& spec);

    const SchemeFamily& alpha() const { return alpha_; }
    const SchemeFamily& beta() const { return beta_; }

    /// (alpha_n, beta_n) at 0-based step n.
    std::pair<double, double> operator()(std::size_t n) const { return {alpha_(n), beta_(n)}; }

    SchemeFlags declared_flags() const;
    std::string to_string() const;

private:
    SchemeFamily alpha_;
    SchemeFamily beta_;
};

/// The six schemes S1..S6 of the reference experiments. All use beta = 1/n;
/// alpha is 1-1/n, 0.5, 0.01, 1/n^0.5, 1/n^0.01 and U[0,1] respectively.
Scheme table_scheme(int index, std::uint64_t uniform_seed = 0);
std::vector<std::pair<std::string, Scheme>> table_schemes(std::uint64_t uniform_seed = 0);

/// Builds a progressing scheme with sum alpha_n * eps(n) < inf for a
/// nonincreasing error bound eps -> 0 (eps is indexed by 0-based step).
///
/// Levels: with eps' the running minimum of eps, step n belongs to level k
/// when eps'(n) is in (2^-(k+1), 2^-k].  The first ceil(2^(k/2)) steps of a
/// level get alpha = 1/2, the rest alpha = 0; eps' = 0 gives alpha = 1/2
/// throughout.  beta_n = alpha_n / ln(2 + m_n) where m_n counts earlier steps
/// with nonzero alpha.  Values are computed lazily and cached; evaluation is
/// thread-safe.  Negative eps values throw std::invalid_argument on reach.
Scheme synthesize_scheme(std::function<double(std::size_t)> eps);

/// Analytic level bound sum_k ceil(2^(k/2)) * 1/2 * 2^-k over the levels
/// entered by eps within the first `horizon` steps.
double synthesis_level_bound(const std::function<double(std::size_t)>& eps, std::size_t horizon);

struct ProgressingReport {
    std::vector<double> ratios;  ///< beta_n / alpha_n with 0/0 = 0 and x/0 = inf
    double beta_partial_sum = 0.0;
    double last_decile_max_ratio = 0.0;
    bool infinite_ratio_in_last_decile = false;
    SchemeFlags declared;
};

ProgressingReport progressing_diagnostic(const Scheme& scheme, std::size_t horizon);

// ---------------------------------------------------------------------------
// Vector (generalized) schemes
// ---------------------------------------------------------------------------

using IndexSet = std::vector<std::size_t>;
/// n -> I_n. Must be a deterministic function of n.
using IndexSetSequence = std::function<IndexSet(std::size_t)>;

struct VectorParams {
    ValueVector alpha;
    ValueVector beta;
};

namespace detail {
class VectorSchemeImpl;
}

/// Per-component parameter sequences in [0,1)^d.
///
/// Counter-based derivations keep a cursor so that sequential evaluation is
/// O(d) per step; evaluating an earlier step rewinds. Not safe to share
/// between concurrent runs.
class VectorScheme {
public:
    /// d independent scalar schemes.
    static VectorScheme per_component(std::vector<Scheme> schemes);
    /// d copies of one scalar scheme.
    static VectorScheme broadcast(const Scheme& scheme, std::size_t dimension);
    /// inner restricted to I_n: alpha'_n(j) = alpha_n(j) for j in I_n, else 0 (same for beta).
    static VectorScheme masked(VectorScheme inner, IndexSetSequence index_sets);
    /// Chaotic derivation with local counters: an active component j uses the
    /// base scheme at its own activation count (number of earlier steps with
    /// j active); inactive components get 0.
    static VectorScheme local_counter(const Scheme& base, std::size_t dimension,
                                      IndexSetSequence index_sets);
    /// Arbitrary generator n -> (alpha_n, beta_n). Values are checked against [0,1).
    static VectorScheme custom(std::size_t dimension, std::function<VectorParams(std::size_t)> fn);

    VectorScheme(const VectorScheme& other);
    VectorScheme& operator=(const VectorScheme& other);
    VectorScheme(VectorScheme&&) noexcept;
    VectorScheme& operator=(VectorScheme&&) noexcept;
    ~VectorScheme();

    std::size_t dimension() const;

    VectorParams operator()(std::size_t n) const;
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const;

private:
    explicit VectorScheme(std::unique_ptr<detail::VectorSchemeImpl> impl);
    std::unique_ptr<detail::VectorSchemeImpl> impl_;
};

/// Checks an index set against dimension d; throws std::out_of_range.
void check_index_set(const IndexSet& set, std::size_t dimension);

struct SweepReport {
    /// Interval starts m_0 = 0, m_1, ... followed by the end of the last interval.
    std::vector<std::size_t> boundaries;
    /// last_update[k][i] = l_k(i), the last step in interval k with alpha(i) > 0, or -1.
    std::vector<std::vector<std::int64_t>> last_update;
    /// Whether every component was updated in interval k. Only the final interval
    /// can be incomplete.
    std::vector<bool> complete;
    /// min_i beta_{l_k(i)}(i) for every complete interval k.
    std::vector<double> min_beta;
    /// Running sums of min_beta.
    std::vector<double> partial_sums;

    std::size_t interval_count() const { return complete.size(); }
};

SweepReport sweep_analysis(const VectorScheme& scheme, std::size_t horizon);

} // namespace mannfix
