#include "mannfix/scheme.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <mutex>
#include <stdexcept>

namespace mannfix {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based uniform in [0,1): a pure function of (seed, n).
double uniform_at(std::uint64_t seed, std::size_t n) {
    const std::uint64_t h = splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(n));
    return static_cast<double>(h >> 11) * 0x1p-53;
}

double cap(double v) { return v >= 1.0 ? kAlmostOne : v; }

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw std::invalid_argument("invalid number '" + text + "' in " + context);
    return value;
}

std::uint64_t parse_seed(const std::string& text) {
    std::uint64_t value = 0;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), last, value);
    if (ec != std::errc() || ptr != last)
        throw std::invalid_argument("invalid seed '" + text + "'");
    return value;
}

// Level k with eps in (2^-(k+1), 2^-k], computed exactly from the binary exponent.
long level_of(double eps) {
    int exponent = 0;
    const double mantissa = std::frexp(eps, &exponent); // eps = mantissa * 2^exponent, mantissa in [0.5,1)
    if (mantissa == 0.5) return 1 - exponent;
    return -exponent;
}

double level_budget(long level) { return std::ceil(std::exp2(static_cast<double>(level) / 2.0)); }

} // namespace

namespace detail {

class SynthesisTable {
public:
    explicit SynthesisTable(std::function<double(std::size_t)> eps) : eps_(std::move(eps)) {}

    double alpha(std::size_t n) const {
        std::lock_guard lock(mutex_);
        extend_to(n);
        return alpha_[n];
    }

    double beta(std::size_t n) const {
        std::lock_guard lock(mutex_);
        extend_to(n);
        return beta_[n];
    }

private:
    void extend_to(std::size_t n) const {
        while (alpha_.size() <= n) {
            const std::size_t step = alpha_.size();
            const double e = eps_(step);
            if (!(e >= 0.0))
                throw std::invalid_argument("synthesize_scheme: eps(" + std::to_string(step) +
                                            ") is negative or NaN");
            envelope_ = std::min(envelope_, e);

            double a = 0.5;
            if (envelope_ > 0.0) {
                const long level = level_of(envelope_);
                if (!has_level_ || level != level_) {
                    has_level_ = true;
                    level_ = level;
                    in_level_ = 0;
                }
                a = static_cast<double>(in_level_) < level_budget(level_) ? 0.5 : 0.0;
                ++in_level_;
            }
            const double b = a > 0.0 ? a / std::log(2.0 + static_cast<double>(nonzero_)) : 0.0;
            if (a > 0.0) ++nonzero_;
            alpha_.push_back(a);
            beta_.push_back(b);
        }
    }

    std::function<double(std::size_t)> eps_;
    mutable std::mutex mutex_;
    mutable std::vector<double> alpha_;
    mutable std::vector<double> beta_;
    mutable double envelope_ = kInfinity;
    mutable bool has_level_ = false;
    mutable long level_ = 0;
    mutable std::size_t in_level_ = 0;
    mutable std::size_t nonzero_ = 0;
};

} // namespace detail

// ---------------------------------------------------------------------------
// SchemeFamily
// ---------------------------------------------------------------------------

SchemeFamily SchemeFamily::one_minus_inverse() { return {FamilyKind::OneMinusInverse, 0.0}; }

SchemeFamily SchemeFamily::constant(double c) {
    if (!(c >= 0.0 && c < 1.0))
        throw std::invalid_argument("constant family requires c in [0,1), got " + format_double(c));
    return {FamilyKind::Constant, c};
}

SchemeFamily SchemeFamily::inverse_power(double exponent) {
    if (!(exponent >= 0.0) || !std::isfinite(exponent))
        throw std::invalid_argument("inverse power family requires a finite exponent >= 0");
    return {FamilyKind::InversePower, exponent};
}

SchemeFamily SchemeFamily::uniform(std::uint64_t seed) {
    SchemeFamily f{FamilyKind::UniformRandom, 0.0};
    f.seed_ = seed;
    return f;
}

SchemeFamily SchemeFamily::harmonic() { return {FamilyKind::Harmonic, 0.0}; }

SchemeFamily SchemeFamily::zero() { return {FamilyKind::Zero, 0.0}; }

SchemeFamily SchemeFamily::parse(const std::string& token) {
    const auto colon = token.find(':');
    const std::string name = token.substr(0, colon);
    const bool has_param = colon != std::string::npos;
    const std::string param = has_param ? token.substr(colon + 1) : std::string{};

    auto no_param = [&] {
        if (has_param) throw std::invalid_argument("family '" + name + "' takes no parameter");
    };
    auto need_param = [&] {
        if (!has_param || param.empty())
            throw std::invalid_argument("family '" + name + "' requires a parameter");
    };

    if (name == "one-minus-inv") {
        no_param();
        return one_minus_inverse();
    }
    if (name == "const") {
        need_param();
        return constant(parse_double(param, token));
    }
    if (name == "inv-pow") {
        need_param();
        return inverse_power(parse_double(param, token));
    }
    if (name == "uniform") return uniform(has_param ? parse_seed(param) : 0);
    if (name == "harmonic") {
        no_param();
        return harmonic();
    }
    if (name == "zero") {
        no_param();
        return zero();
    }
    if (name == "synth")
        throw std::invalid_argument("'synth' must be used for both alpha and beta of a scheme");
    throw std::invalid_argument("unknown scheme family '" + name + "'");
}

SequenceFlags SchemeFamily::flags() const {
    switch (kind_) {
    case FamilyKind::OneMinusInverse: return {false, true};
    case FamilyKind::Constant: return {parameter_ == 0.0, parameter_ > 0.0};
    case FamilyKind::InversePower: return {parameter_ > 0.0, parameter_ <= 1.0};
    case FamilyKind::UniformRandom: return {false, true};
    case FamilyKind::Harmonic: return {true, true};
    case FamilyKind::Zero: return {true, false};
    case FamilyKind::Synthesized: return {beta_role_, true};
    }
    return {};
}

double SchemeFamily::operator()(std::size_t n) const {
    const double p = static_cast<double>(n) + 1.0;
    switch (kind_) {
    case FamilyKind::OneMinusInverse: return 1.0 - 1.0 / p;
    case FamilyKind::Constant: return parameter_;
    case FamilyKind::InversePower: return cap(1.0 / std::pow(p, parameter_));
    case FamilyKind::UniformRandom: return uniform_at(seed_, n);
    case FamilyKind::Harmonic: return cap(1.0 / p);
    case FamilyKind::Zero: return 0.0;
    case FamilyKind::Synthesized: return beta_role_ ? table_->beta(n) : table_->alpha(n);
    }
    return 0.0;
}

std::string SchemeFamily::to_string() const {
    switch (kind_) {
    case FamilyKind::OneMinusInverse: return "one-minus-inv";
    case FamilyKind::Constant: return "const:" + format_double(parameter_);
    case FamilyKind::InversePower: return "inv-pow:" + format_double(parameter_);
    case FamilyKind::UniformRandom: return "uniform:" + std::to_string(seed_);
    case FamilyKind::Harmonic: return "harmonic";
    case FamilyKind::Zero: return "zero";
    case FamilyKind::Synthesized:
        return parameter_ > 0.0 ? "synth:" + format_double(parameter_) : std::string("synth");
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Scheme
// ---------------------------------------------------------------------------

Scheme::Scheme(SchemeFamily alpha, SchemeFamily beta) : alpha_(std::move(alpha)), beta_(std::move(beta)) {
    const bool alpha_synth = alpha_.kind() == FamilyKind::Synthesized;
    const bool beta_synth = beta_.kind() == FamilyKind::Synthesized;
    if (alpha_synth != beta_synth || (alpha_synth && alpha_.table_ != beta_.table_))
        throw std::invalid_argument("synthesized families must come from the same synthesize_scheme call");
    if (alpha_synth && (alpha_.beta_role_ || !beta_.beta_role_))
        throw std::invalid_argument("synthesized families are swapped");
}

Scheme Scheme::parse(const std::string& spec) {
    std::string alpha_token;
    std::string beta_token;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto comma = spec.find(',', start);
        if (comma == std::string::npos) comma = spec.size();
        const std::string item = spec.substr(start, comma - start);
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("scheme item '" + item + "' lacks '='");
        const std::string key = item.substr(0, eq);
        const std::string value = item.substr(eq + 1);
        if (key == "alpha" && alpha_token.empty())
            alpha_token = value;
        else if (key == "beta" && beta_token.empty())
            beta_token = value;
        else
            throw std::invalid_argument("unexpected or repeated scheme key '" + key + "'");
        start = comma + 1;
    }
    if (alpha_token.empty() || beta_token.empty())
        throw std::invalid_argument("scheme spec needs both alpha= and beta=: '" + spec + "'");

    auto synth_exponent = [](const std::string& token) -> double {
        if (token == "synth") return 1.0;
        if (token.rfind("synth:", 0) == 0) {
            const double p = parse_double(token.substr(6), token);
            if (!(p > 0.0) || !std::isfinite(p))
                throw std::invalid_argument("synth exponent must be positive");
            return p;
        }
        return -1.0;
    };
    const double pa = synth_exponent(alpha_token);
    const double pb = synth_exponent(beta_token);
    if (pa > 0.0 || pb > 0.0) {
        if (pa < 0.0 || pb < 0.0)
            throw std::invalid_argument("'synth' must be used for both alpha and beta");
        const bool alpha_explicit = alpha_token != "synth";
        const bool beta_explicit = beta_token != "synth";
        if (alpha_explicit && beta_explicit && pa != pb)
            throw std::invalid_argument("conflicting synth exponents");
        const double p = alpha_explicit ? pa : pb;
        Scheme s = synthesize_scheme([p](std::size_t n) { return std::pow(static_cast<double>(n) + 1.0, -p); });
        s.alpha_.parameter_ = p;
        s.beta_.parameter_ = p;
        return s;
    }
    return Scheme(SchemeFamily::parse(alpha_token), SchemeFamily::parse(beta_token));
}

namespace {

// Declared limit of beta_n / alpha_n being zero, from the family pair.
bool quotient_vanishes(const SchemeFamily& alpha, const SchemeFamily& beta) {
    switch (beta.kind()) {
    case FamilyKind::Zero: return true;
    case FamilyKind::Constant: return beta.parameter() == 0.0;
    case FamilyKind::Synthesized: return alpha.kind() == FamilyKind::Synthesized;
    case FamilyKind::Harmonic:
    case FamilyKind::InversePower: {
        const double beta_rate = beta.kind() == FamilyKind::Harmonic ? 1.0 : beta.parameter();
        if (beta_rate <= 0.0) return false;
        switch (alpha.kind()) {
        case FamilyKind::OneMinusInverse: return true;
        case FamilyKind::Constant: return alpha.parameter() > 0.0;
        case FamilyKind::InversePower: return alpha.parameter() < beta_rate;
        case FamilyKind::Harmonic: return beta_rate > 1.0;
        // U[0,1) dips below 1/(c n) infinitely often almost surely.
        default: return false;
        }
    }
    default: return false;
    }
}

} // namespace

SchemeFlags Scheme::declared_flags() const {
    const SequenceFlags b = beta_.flags();
    SchemeFlags flags;
    flags.beta_to_zero = b.to_zero;
    flags.beta_sum_diverges = b.sum_diverges;
    flags.progressing = b.to_zero && b.sum_diverges && quotient_vanishes(alpha_, beta_);
    return flags;
}

std::string Scheme::to_string() const {
    return "alpha=" + alpha_.to_string() + ",beta=" + beta_.to_string();
}

Scheme table_scheme(int index, std::uint64_t uniform_seed) {
    const SchemeFamily beta = SchemeFamily::harmonic();
    switch (index) {
    case 1: return {SchemeFamily::one_minus_inverse(), beta};
    case 2: return {SchemeFamily::constant(0.5), beta};
    case 3: return {SchemeFamily::constant(0.01), beta};
    case 4: return {SchemeFamily::inverse_power(0.5), beta};
    case 5: return {SchemeFamily::inverse_power(0.01), beta};
    case 6: return {SchemeFamily::uniform(uniform_seed), beta};
    default: throw std::out_of_range("table scheme index must be in 1..6");
    }
}

std::vector<std::pair<std::string, Scheme>> table_schemes(std::uint64_t uniform_seed) {
    std::vector<std::pair<std::string, Scheme>> out;
    for (int i = 1; i <= 6; ++i) out.emplace_back("S" + std::to_string(i), table_scheme(i, uniform_seed));
    return out;
}

Scheme synthesize_scheme(std::function<double(std::size_t)> eps) {
    auto table = std::make_shared<const detail::SynthesisTable>(std::move(eps));
    SchemeFamily alpha{FamilyKind::Synthesized, 0.0};
    SchemeFamily beta{FamilyKind::Synthesized, 0.0};
    alpha.table_ = table;
    beta.table_ = table;
    beta.beta_role_ = true;
    return Scheme(std::move(alpha), std::move(beta));
}

double synthesis_level_bound(const std::function<double(std::size_t)>& eps, std::size_t horizon) {
    double envelope = kInfinity;
    bool has_level = false;
    long current = 0;
    double bound = 0.0;
    for (std::size_t n = 0; n < horizon; ++n) {
        envelope = std::min(envelope, eps(n));
        if (envelope <= 0.0) break;
        const long level = level_of(envelope);
        if (!has_level || level != current) {
            has_level = true;
            current = level;
            bound += level_budget(level) * 0.5 * std::exp2(-static_cast<double>(level));
        }
    }
    return bound;
}

ProgressingReport progressing_diagnostic(const Scheme& scheme, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("progressing_diagnostic: horizon must be >= 1");
    ProgressingReport report;
    report.declared = scheme.declared_flags();
    report.ratios.reserve(horizon);
    const std::size_t decile = std::max<std::size_t>(1, (horizon + 9) / 10);
    const std::size_t decile_start = horizon - decile;
    for (std::size_t n = 0; n < horizon; ++n) {
        const auto [a, b] = scheme(n);
        double ratio;
        if (b == 0.0)
            ratio = 0.0;
        else if (a == 0.0)
            ratio = kInfinity;
        else
            ratio = b / a;
        report.ratios.push_back(ratio);
        report.beta_partial_sum += b;
        if (n >= decile_start) report.last_decile_max_ratio = std::max(report.last_decile_max_ratio, ratio);
    }
    report.infinite_ratio_in_last_decile = std::isinf(report.last_decile_max_ratio);
    return report;
}

// ---------------------------------------------------------------------------
// VectorScheme
// ---------------------------------------------------------------------------

void check_index_set(const IndexSet& set, std::size_t dimension) {
    for (auto j : set)
        if (j >= dimension)
            throw std::out_of_range("index " + std::to_string(j) + " outside dimension " +
                                    std::to_string(dimension));
}

namespace detail {

class VectorSchemeImpl {
public:
    virtual ~VectorSchemeImpl() = default;
    virtual std::size_t dimension() const = 0;
    virtual void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const = 0;
    virtual std::unique_ptr<VectorSchemeImpl> clone() const = 0;
};

namespace {

class PerComponentImpl final : public VectorSchemeImpl {
public:
    explicit PerComponentImpl(std::vector<Scheme> schemes) : schemes_(std::move(schemes)) {}
    std::size_t dimension() const override { return schemes_.size(); }
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const override {
        alpha.resize(schemes_.size());
        beta.resize(schemes_.size());
        for (std::size_t i = 0; i < schemes_.size(); ++i) std::tie(alpha[i], beta[i]) = schemes_[i](n);
    }
    std::unique_ptr<VectorSchemeImpl> clone() const override {
        return std::make_unique<PerComponentImpl>(*this);
    }

private:
    std::vector<Scheme> schemes_;
};

class BroadcastImpl final : public VectorSchemeImpl {
public:
    BroadcastImpl(Scheme scheme, std::size_t d) : scheme_(std::move(scheme)), d_(d) {}
    std::size_t dimension() const override { return d_; }
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const override {
        const auto [a, b] = scheme_(n);
        alpha.assign(d_, a);
        beta.assign(d_, b);
    }
    std::unique_ptr<VectorSchemeImpl> clone() const override { return std::make_unique<BroadcastImpl>(*this); }

private:
    Scheme scheme_;
    std::size_t d_;
};

class MaskedImpl final : public VectorSchemeImpl {
public:
    MaskedImpl(VectorScheme inner, IndexSetSequence sets) : inner_(std::move(inner)), sets_(std::move(sets)) {}
    std::size_t dimension() const override { return inner_.dimension(); }
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const override {
        const std::size_t d = inner_.dimension();
        inner_.eval_into(n, alpha, beta);
        const IndexSet active = sets_(n);
        check_index_set(active, d);
        mask_.assign(d, 0);
        for (auto j : active) mask_[j] = 1;
        for (std::size_t j = 0; j < d; ++j)
            if (!mask_[j]) alpha[j] = beta[j] = 0.0;
    }
    std::unique_ptr<VectorSchemeImpl> clone() const override { return std::make_unique<MaskedImpl>(*this); }

private:
    VectorScheme inner_;
    IndexSetSequence sets_;
    mutable std::vector<char> mask_;
};

class LocalCounterImpl final : public VectorSchemeImpl {
public:
    LocalCounterImpl(Scheme base, std::size_t d, IndexSetSequence sets)
        : base_(std::move(base)), d_(d), sets_(std::move(sets)), counts_(d, 0) {}
    std::size_t dimension() const override { return d_; }
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const override {
        if (n < cursor_) {
            counts_.assign(d_, 0);
            cursor_ = 0;
        }
        while (cursor_ < n) {
            for (auto j : unique_active(cursor_)) ++counts_[j];
            ++cursor_;
        }
        alpha.assign(d_, 0.0);
        beta.assign(d_, 0.0);
        for (auto j : unique_active(n)) std::tie(alpha[j], beta[j]) = base_(counts_[j]);
    }
    std::unique_ptr<VectorSchemeImpl> clone() const override {
        return std::make_unique<LocalCounterImpl>(*this);
    }

private:
    IndexSet unique_active(std::size_t n) const {
        IndexSet active = sets_(n);
        check_index_set(active, d_);
        std::sort(active.begin(), active.end());
        active.erase(std::unique(active.begin(), active.end()), active.end());
        return active;
    }

    Scheme base_;
    std::size_t d_;
    IndexSetSequence sets_;
    mutable std::vector<std::size_t> counts_;
    mutable std::size_t cursor_ = 0;
};

class CustomImpl final : public VectorSchemeImpl {
public:
    CustomImpl(std::size_t d, std::function<VectorParams(std::size_t)> fn) : d_(d), fn_(std::move(fn)) {}
    std::size_t dimension() const override { return d_; }
    void eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const override {
        VectorParams p = fn_(n);
        require_dimension("custom vector scheme alpha", d_, p.alpha.size());
        require_dimension("custom vector scheme beta", d_, p.beta.size());
        for (std::size_t j = 0; j < d_; ++j)
            if (!(p.alpha[j] >= 0.0 && p.alpha[j] < 1.0 && p.beta[j] >= 0.0 && p.beta[j] < 1.0))
                throw std::domain_error("custom vector scheme emitted a parameter outside [0,1) at step " +
                                        std::to_string(n));
        alpha = std::move(p.alpha);
        beta = std::move(p.beta);
    }
    std::unique_ptr<VectorSchemeImpl> clone() const override { return std::make_unique<CustomImpl>(*this); }

private:
    std::size_t d_;
    std::function<VectorParams(std::size_t)> fn_;
};

} // namespace
} // namespace detail

VectorScheme::VectorScheme(std::unique_ptr<detail::VectorSchemeImpl> impl) : impl_(std::move(impl)) {
    if (impl_->dimension() == 0) throw std::invalid_argument("vector scheme needs dimension >= 1");
}

VectorScheme::VectorScheme(const VectorScheme& other) : impl_(other.impl_->clone()) {}

VectorScheme& VectorScheme::operator=(const VectorScheme& other) {
    if (this != &other) impl_ = other.impl_->clone();
    return *this;
}

VectorScheme::VectorScheme(VectorScheme&&) noexcept = default;
VectorScheme& VectorScheme::operator=(VectorScheme&&) noexcept = default;
VectorScheme::~VectorScheme() = default;

VectorScheme VectorScheme::per_component(std::vector<Scheme> schemes) {
    return VectorScheme(std::make_unique<detail::PerComponentImpl>(std::move(schemes)));
}

VectorScheme VectorScheme::broadcast(const Scheme& scheme, std::size_t dimension) {
    return VectorScheme(std::make_unique<detail::BroadcastImpl>(scheme, dimension));
}

VectorScheme VectorScheme::masked(VectorScheme inner, IndexSetSequence index_sets) {
    return VectorScheme(std::make_unique<detail::MaskedImpl>(std::move(inner), std::move(index_sets)));
}

VectorScheme VectorScheme::local_counter(const Scheme& base, std::size_t dimension, IndexSetSequence index_sets) {
    return VectorScheme(std::make_unique<detail::LocalCounterImpl>(base, dimension, std::move(index_sets)));
}

VectorScheme VectorScheme::custom(std::size_t dimension, std::function<VectorParams(std::size_t)> fn) {
    return VectorScheme(std::make_unique<detail::CustomImpl>(dimension, std::move(fn)));
}

std::size_t VectorScheme::dimension() const { return impl_->dimension(); }

VectorParams VectorScheme::operator()(std::size_t n) const {
    VectorParams p;
    impl_->eval_into(n, p.alpha, p.beta);
    return p;
}

void VectorScheme::eval_into(std::size_t n, ValueVector& alpha, ValueVector& beta) const {
    impl_->eval_into(n, alpha, beta);
}

SweepReport sweep_analysis(const VectorScheme& scheme, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("sweep_analysis: horizon must be >= 1");
    const std::size_t d = scheme.dimension();
    SweepReport report;
    report.boundaries.push_back(0);

    std::vector<std::int64_t> last(d, -1);
    ValueVector last_beta(d, 0.0);
    std::size_t covered = 0;
    std::size_t interval_start = 0;
    double running = 0.0;
    ValueVector alpha, beta;

    for (std::size_t n = 0; n < horizon; ++n) {
        scheme.eval_into(n, alpha, beta);
        for (std::size_t i = 0; i < d; ++i) {
            if (alpha[i] > 0.0) {
                if (last[i] < 0) ++covered;
                last[i] = static_cast<std::int64_t>(n);
                last_beta[i] = beta[i];
            }
        }
        if (covered == d) {
            const double worst = *std::min_element(last_beta.begin(), last_beta.end());
            running += worst;
            report.last_update.push_back(last);
            report.complete.push_back(true);
            report.min_beta.push_back(worst);
            report.partial_sums.push_back(running);
            report.boundaries.push_back(n + 1);
            interval_start = n + 1;
            last.assign(d, -1);
            covered = 0;
        }
    }
    if (interval_start < horizon) {
        report.last_update.push_back(last);
        report.complete.push_back(false);
        report.boundaries.push_back(horizon);
    }
    return report;
}

} // namespace mannfix
