#pragma once

// Test processes with exact conditional-probability oracles.
//
// Three stationary families: i.i.d. Bernoulli, binary Markov chains of finite
// order r, and binary-output hidden Markov models. Each one samples from its
// stationary law, answers P(X_{n+1}=1 | x_0..x_n) exactly, and reports its
// entropy rate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bits.hpp"
#include "errors.hpp"

namespace forecast_lab {

using Matrix = Eigen::MatrixXd;

namespace detail {

inline bool is_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

inline void require_stochastic(const Matrix& m, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InvalidSpec(std::string(what) + " must be square and nonempty");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (!is_probability(m(i, j))) throw InvalidSpec(std::string(what) + " has an entry outside [0,1]");
            sum += m(i, j);
        }
        if (std::abs(sum - 1.0) > 1e-12) throw InvalidSpec(std::string(what) + " row does not sum to 1");
    }
}

/// Number of closed communicating classes of the transition graph.
inline std::size_t closed_class_count(const Matrix& m) {
    const auto n = static_cast<std::size_t>(m.rows());
    std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
    std::vector<std::size_t> stack;
    for (std::size_t s = 0; s < n; ++s) {
        auto& r = reach[s];
        r[s] = 1;
        stack.assign(1, s);
        while (!stack.empty()) {
            std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < n; ++v) {
                if (m(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0 && !r[v]) {
                    r[v] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    // s is recurrent iff everything it reaches reaches back; count the smallest member of each class.
    std::size_t classes = 0;
    for (std::size_t s = 0; s < n; ++s) {
        bool closed = true;
        bool smallest = true;
        for (std::size_t v = 0; v < n && closed; ++v) {
            if (reach[s][v] && !reach[v][s]) closed = false;
            if (reach[s][v] && reach[v][s] && v < s) smallest = false;
        }
        if (closed && smallest) ++classes;
    }
    return classes;
}

inline double stationary_residual(const Matrix& m, const Eigen::VectorXd& pi) {
    return (m.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
}

inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t draw_index(std::span<const double> law, double u) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < law.size(); ++i) {
        acc += law[i];
        if (u < acc) return i;
    }
    return law.size() - 1;
}

inline double binary_entropy(double p) {
    if (p <= 0.0 || p >= 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

}  // namespace detail

using detail::binary_entropy;

inline constexpr double kStationaryTolerance = 1e-12;

/// Stationary law of a row-stochastic matrix with a single closed class.
/// Direct linear solve for up to 1024 states, power iteration on the lazy chain otherwise
/// or when the direct residual misses tolerance.
inline std::vector<double> stationary_law(const Matrix& m) {
    detail::require_stochastic(m, "transition matrix");
    if (detail::closed_class_count(m) != 1) throw NotIrreducible("chain has more than one closed class");
    const Eigen::Index n = m.rows();

    Eigen::VectorXd pi;
    if (n <= 1024) {
        Matrix a = m.transpose() - Matrix::Identity(n, n);
        a.row(n - 1).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
        rhs(n - 1) = 1.0;
        pi = a.fullPivLu().solve(rhs);
        pi = pi.cwiseMax(0.0);
        pi /= pi.sum();
    }
    if (pi.size() == 0 || detail::stationary_residual(m, pi) > kStationaryTolerance) {
        const Matrix lazy = 0.5 * (m + Matrix::Identity(n, n));
        pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
        for (int it = 0; it < 1'000'000; ++it) {
            Eigen::VectorXd next = lazy.transpose() * pi;
            next /= next.sum();
            const double delta = (next - pi).lpNorm<Eigen::Infinity>();
            pi = next;
            if (delta < 1e-15) break;
        }
        if (detail::stationary_residual(m, pi) > kStationaryTolerance)
            throw NumericalUnderflow("stationary law did not reach tolerance");
    }
    return {pi.data(), pi.data() + n};
}

struct Bernoulli {
    double p;
};

/// Binary Markov chain of order r. Contexts are the last r symbols packed with
/// the most recent symbol in the least significant bit; kernel[c] = P(next = 1 | c).
struct MarkovChain {
    std::size_t order;
    std::vector<double> kernel;
    std::vector<double> initial;  // stationary law of (X_0 .. X_{r-1}) over contexts

    std::size_t context_count() const noexcept { return std::size_t{1} << order; }
    std::size_t context_mask() const noexcept { return context_count() - 1; }

    Matrix transition_matrix() const {
        const auto n = static_cast<Eigen::Index>(context_count());
        Matrix t = Matrix::Zero(n, n);
        for (std::size_t c = 0; c < context_count(); ++c) {
            const auto next0 = static_cast<Eigen::Index>((c << 1) & context_mask());
            const auto next1 = static_cast<Eigen::Index>(((c << 1) | 1) & context_mask());
            t(static_cast<Eigen::Index>(c), next0) += 1.0 - kernel[c];
            t(static_cast<Eigen::Index>(c), next1) += kernel[c];
        }
        return t;
    }
};

struct BinaryHMM {
    Matrix transition;            // S x S, row-stochastic
    std::vector<double> emission; // P(emit 1 | hidden state)
    std::vector<double> initial;  // stationary hidden law

    std::size_t states() const noexcept { return emission.size(); }
};

/// Immutable description of a generating process.
class ProcessSpec {
public:
    using Variant = std::variant<Bernoulli, MarkovChain, BinaryHMM>;

    static ProcessSpec bernoulli(double p) {
        if (!detail::is_probability(p)) throw InvalidSpec("Bernoulli parameter outside [0,1]");
        return ProcessSpec(Bernoulli{p});
    }

    /// kernel has 2^order entries; the initial law is the stationary law of the context chain.
    static ProcessSpec markov(std::size_t order, std::vector<double> kernel) {
        if (order == 0 || order > 10) throw InvalidSpec("Markov order must be in 1..10");
        if (kernel.size() != (std::size_t{1} << order)) throw InvalidSpec("Markov kernel must have 2^order entries");
        for (double p : kernel)
            if (!detail::is_probability(p)) throw InvalidSpec("Markov kernel entry outside [0,1]");
        MarkovChain mc{order, std::move(kernel), {}};
        mc.initial = stationary_law(mc.transition_matrix());
        return ProcessSpec(std::move(mc));
    }

    /// Symmetric first-order chain that flips its symbol with probability `flip`.
    static ProcessSpec symmetric_markov(double flip) { return markov(1, {flip, 1.0 - flip}); }

    static ProcessSpec hmm(Matrix transition, std::vector<double> emission) {
        detail::require_stochastic(transition, "HMM transition");
        if (static_cast<std::size_t>(transition.rows()) != emission.size())
            throw InvalidSpec("HMM emission size must match the state count");
        for (double e : emission)
            if (!detail::is_probability(e)) throw InvalidSpec("HMM emission outside [0,1]");
        auto initial = stationary_law(transition);
        return ProcessSpec(BinaryHMM{std::move(transition), std::move(emission), std::move(initial)});
    }

    /// Same as hmm() but with a caller-supplied initial law, checked for stationarity.
    static ProcessSpec hmm(Matrix transition, std::vector<double> emission, std::vector<double> initial) {
        ProcessSpec spec = hmm(std::move(transition), std::move(emission));
        auto& h = std::get<BinaryHMM>(spec.variant_);
        if (initial.size() != h.states()) throw InvalidSpec("HMM initial law has the wrong size");
        Eigen::Map<const Eigen::VectorXd> law(initial.data(), static_cast<Eigen::Index>(initial.size()));
        if (std::abs(law.sum() - 1.0) > 1e-10 || detail::stationary_residual(h.transition, law) > 1e-10)
            throw InvalidSpec("HMM initial law is not stationary");
        h.initial = std::move(initial);
        return spec;
    }

    const Variant& variant() const noexcept { return variant_; }

    bool is_bernoulli() const noexcept { return std::holds_alternative<Bernoulli>(variant_); }
    bool is_markov() const noexcept { return std::holds_alternative<MarkovChain>(variant_); }
    bool is_hmm() const noexcept { return std::holds_alternative<BinaryHMM>(variant_); }

    /// Number of past symbols the conditional depends on; nullopt for HMMs (infinite memory).
    std::optional<std::size_t> memory() const {
        if (is_bernoulli()) return 0;
        if (is_markov()) return std::get<MarkovChain>(variant_).order;
        return std::nullopt;
    }

private:
    explicit ProcessSpec(Variant v) : variant_(std::move(v)) {}
    Variant variant_;
};

/// Incremental exact predictor: feed x_0, x_1, ... and query P(next = 1 | fed prefix).
/// Also accumulates log2 p_n of the fed block.
class ConditionalOracle {
public:
    explicit ConditionalOracle(const ProcessSpec& spec) : spec_(&spec) {
        if (const auto* h = std::get_if<BinaryHMM>(&spec.variant())) predictive_ = h->initial;
    }

    std::size_t observed() const noexcept { return observed_; }
    double log2_prob() const noexcept { return log2_prob_; }
    bool impossible() const noexcept { return impossible_; }

    /// P(X_n = 1 | x_0..x_{n-1}) where n = observed(); for n = 0 the stationary P(X_0 = 1).
    double prob_one() const {
        if (impossible_) throw NumericalUnderflow("conditional undefined after a probability-zero prefix");
        return std::visit([this](const auto& v) { return prob_one_impl(v); }, spec_->variant());
    }

    void observe(Bit b) {
        if (impossible_) return;
        const double p1 = prob_one();
        const double pb = b ? p1 : 1.0 - p1;
        if (const auto* h = std::get_if<BinaryHMM>(&spec_->variant())) update_filter(*h, b);
        if (pb <= 0.0) {
            impossible_ = true;
            log2_prob_ = -std::numeric_limits<double>::infinity();
        } else {
            log2_prob_ += std::log2(pb);
        }
        context_ = (context_ << 1) | b;
        ++observed_;
    }

    /// Hidden-state predictive law P(h_n | x_0..x_{n-1}); empty unless the spec is an HMM.
    std::span<const double> hidden_law() const noexcept { return predictive_; }

private:
    double prob_one_impl(const Bernoulli& b) const { return b.p; }

    double prob_one_impl(const MarkovChain& mc) const {
        if (observed_ >= mc.order) return mc.kernel[context_ & mc.context_mask()];
        // Fewer than r symbols seen: by stationarity this is P(X_r = 1 | X_{r-n}^{r-1} = prefix),
        // the kernel averaged over the stationary law of the unseen older context bits.
        const std::size_t seen_mask = (std::size_t{1} << observed_) - 1;
        const std::size_t seen = context_ & seen_mask;
        double num = 0.0;
        double den = 0.0;
        for (std::size_t c = 0; c < mc.context_count(); ++c) {
            if ((c & seen_mask) != seen) continue;
            num += mc.initial[c] * mc.kernel[c];
            den += mc.initial[c];
        }
        if (den <= 0.0) throw NumericalUnderflow("prefix has zero stationary probability");
        return num / den;
    }

    double prob_one_impl(const BinaryHMM& h) const {
        double p = 0.0;
        for (std::size_t s = 0; s < h.states(); ++s) p += predictive_[s] * h.emission[s];
        return std::clamp(p, 0.0, 1.0);
    }

    void update_filter(const BinaryHMM& h, Bit b) {
        const std::size_t n = h.states();
        posterior_.resize(n);
        double norm = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            posterior_[s] = predictive_[s] * (b ? h.emission[s] : 1.0 - h.emission[s]);
            norm += posterior_[s];
        }
        if (!(norm > 0.0) || !std::isfinite(norm)) return;  // caller marks the prefix impossible
        for (auto& v : posterior_) v /= norm;
        std::fill(predictive_.begin(), predictive_.end(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            if (posterior_[s] == 0.0) continue;
            for (std::size_t t = 0; t < n; ++t)
                predictive_[t] += posterior_[s] * h.transition(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
        }
        double total = 0.0;
        for (double v : predictive_) total += v;
        if (!(total > 0.0)) throw NumericalUnderflow("hidden-state posterior vanished");
        for (auto& v : predictive_) v /= total;
    }

    const ProcessSpec* spec_;
    std::vector<double> predictive_;
    std::vector<double> posterior_;
    std::uint64_t context_ = 0;
    std::size_t observed_ = 0;
    double log2_prob_ = 0.0;
    bool impossible_ = false;
};

/// Exact P(X_{n+1} = 1 | X_0..X_n = prefix).
inline double oracle_conditional(const ProcessSpec& spec, std::span<const Bit> prefix) {
    if (prefix.empty()) throw Error("oracle_conditional needs a nonempty prefix");
    ConditionalOracle oracle(spec);
    for (Bit b : prefix) oracle.observe(b);
    return oracle.prob_one();
}

/// log2 p_n(block) via the chain rule; -inf for impossible blocks.
inline double log2_marginal_prob(const ProcessSpec& spec, std::span<const Bit> block) {
    if (block.empty()) throw Error("marginal_prob needs a nonempty block");
    ConditionalOracle oracle(spec);
    for (Bit b : block) oracle.observe(b);
    return oracle.log2_prob();
}

inline double marginal_prob(const ProcessSpec& spec, std::span<const Bit> block) {
    return std::exp2(log2_marginal_prob(spec, block));
}

/// Exact conditional by summing over every hidden path of length n+2.
/// Independent of the forward filter; limited to prefixes of at most 13 symbols.
inline double brute_force_conditional(const BinaryHMM& h, std::span<const Bit> prefix) {
    const std::size_t len = prefix.size();
    if (len == 0) throw Error("brute_force_conditional needs a nonempty prefix");
    const std::size_t states = h.states();
    const std::size_t steps = len + 1;
    double paths = std::pow(static_cast<double>(states), static_cast<double>(steps));
    if (len > 13 || paths > static_cast<double>(std::uint64_t{1} << 26))
        throw PrefixTooLong("hidden path enumeration exceeds its budget");

    std::vector<std::size_t> path(steps, 0);
    double numerator = 0.0;
    double denominator = 0.0;
    for (;;) {
        double w = h.initial[path[0]];
        for (std::size_t i = 0; i < steps && w != 0.0; ++i) {
            if (i > 0) w *= h.transition(static_cast<Eigen::Index>(path[i - 1]), static_cast<Eigen::Index>(path[i]));
            if (i < len) w *= prefix[i] ? h.emission[path[i]] : 1.0 - h.emission[path[i]];
        }
        denominator += w;
        numerator += w * h.emission[path[steps - 1]];

        std::size_t pos = 0;
        while (pos < steps && ++path[pos] == states) path[pos++] = 0;
        if (pos == steps) break;
    }
    if (!(denominator > 0.0)) throw NumericalUnderflow("prefix has probability zero");
    return numerator / denominator;
}

/// Pull source emitting a stationary sample path of a ProcessSpec.
class ProcessSource final : public BitSource {
public:
    ProcessSource(const ProcessSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {
        if (const auto* b = std::get_if<Bernoulli>(&spec_.variant())) {
            bernoulli_ = b;
        } else if (const auto* mc = std::get_if<MarkovChain>(&spec_.variant())) {
            markov_ = mc;
            context_ = detail::draw_index(mc->initial, detail::uniform01(rng_));
        } else {
            hmm_ = &std::get<BinaryHMM>(spec_.variant());
            hidden_ = detail::draw_index(hmm_->initial, detail::uniform01(rng_));
        }
    }

    ProcessSource(const ProcessSource&) = delete;
    ProcessSource& operator=(const ProcessSource&) = delete;

    std::optional<Bit> next() override {
        if (bernoulli_) return emit(*bernoulli_);
        if (markov_) return emit(*markov_);
        return emit(*hmm_);
    }

    std::uint64_t emitted() const noexcept { return emitted_; }

private:
    Bit emit(const Bernoulli& b) {
        ++emitted_;
        return detail::uniform01(rng_) < b.p ? 1 : 0;
    }

    Bit emit(const MarkovChain& mc) {
        Bit b;
        if (emitted_ < mc.order) {
            // The stationary initial context supplies X_0 .. X_{r-1}, oldest bit first.
            b = static_cast<Bit>((context_ >> (mc.order - 1 - emitted_)) & 1u);
        } else {
            b = detail::uniform01(rng_) < mc.kernel[context_] ? 1 : 0;
            context_ = ((context_ << 1) | b) & mc.context_mask();
        }
        ++emitted_;
        return b;
    }

    Bit emit(const BinaryHMM& h) {
        if (emitted_ > 0) {
            const auto row = h.transition.row(static_cast<Eigen::Index>(hidden_));
            const double u = detail::uniform01(rng_);
            double acc = 0.0;
            std::size_t nxt = h.states() - 1;
            for (std::size_t t = 0; t + 1 < h.states(); ++t) {
                acc += row(static_cast<Eigen::Index>(t));
                if (u < acc) {
                    nxt = t;
                    break;
                }
            }
            hidden_ = nxt;
        }
        ++emitted_;
        return detail::uniform01(rng_) < h.emission[hidden_] ? 1 : 0;
    }

    ProcessSpec spec_;
    std::mt19937_64 rng_;
    const Bernoulli* bernoulli_ = nullptr;
    const MarkovChain* markov_ = nullptr;
    const BinaryHMM* hmm_ = nullptr;
    std::size_t context_ = 0;
    std::size_t hidden_ = 0;
    std::uint64_t emitted_ = 0;
};

inline std::unique_ptr<BitSource> sample_stream(const ProcessSpec& spec, std::uint64_t seed) {
    return std::make_unique<ProcessSource>(spec, seed);
}

struct EntropyEstimate {
    double rate;          // bits per symbol
    double ci_halfwidth;  // 1.96 standard errors; 0 for closed forms
};

struct SmbOptions {
    std::size_t length = 10'000;
    std::size_t runs = 50;
    std::uint64_t seed = 0x5eed'e27a'0b1c'a11dULL;
};

/// Monte Carlo Shannon-McMillan-Breiman estimate: mean of -(1/n) log2 p_n(X_0^{n-1}) over runs.
inline EntropyEstimate smb_entropy_estimate(const ProcessSpec& spec, const SmbOptions& opt = {}) {
    if (opt.length == 0 || opt.runs == 0) throw Error("SMB estimate needs positive length and runs");
    std::vector<double> values;
    values.reserve(opt.runs);
    std::seed_seq seq{opt.seed, opt.seed >> 32};
    std::mt19937_64 seeder(seq);
    for (std::size_t r = 0; r < opt.runs; ++r) {
        ProcessSource src(spec, seeder());
        ConditionalOracle oracle(spec);
        for (std::size_t i = 0; i < opt.length; ++i) oracle.observe(*src.next());
        values.push_back(-oracle.log2_prob() / static_cast<double>(opt.length));
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double n = static_cast<double>(values.size());
    const double stderr_ = values.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
    return {mean, 1.96 * stderr_};
}

/// Entropy rate in bits per symbol: closed form for Bernoulli and Markov specs,
/// Monte Carlo SMB estimate for HMMs.
inline EntropyEstimate entropy_rate(const ProcessSpec& spec, const SmbOptions& opt = {}) {
    if (const auto* b = std::get_if<Bernoulli>(&spec.variant())) return {binary_entropy(b->p), 0.0};
    if (const auto* mc = std::get_if<MarkovChain>(&spec.variant())) {
        double h = 0.0;
        for (std::size_t c = 0; c < mc->context_count(); ++c) h += mc->initial[c] * binary_entropy(mc->kernel[c]);
        return {h, 0.0};
    }
    return smb_entropy_estimate(spec, opt);
}

}  // namespace forecast_lab
