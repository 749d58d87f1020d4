#pragma once

// Recurrence-based stopping times for a binary trajectory.
//
// Level k of the forward scheme waits for the length-k block ending at the
// previous stopping time to occur again:
//
//   eta_k  = min{ t > 0 : x[z-(k-1)+t .. z+t] == x[z-(k-1) .. z] },  z = zeta_{k-1}
//   zeta_k = zeta_{k-1} + eta_k,   zeta_0 = 0
//
// The estimate published at zeta_k is the fraction of ones among the symbols
// that followed zeta_0, ..., zeta_{k-1}. The backward scheme runs the same
// search toward the past with block lengths k, k-1, ..., 1; started at
// zeta_k it lands exactly on -zeta_k.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bits.hpp"
#include "errors.hpp"

namespace forecast_lab {

inline constexpr std::uint64_t kDefaultMaxSteps = std::uint64_t{1} << 26;

enum class MatchSearch {
    rolling,  // packed sliding window, full compare only on a candidate hit
    naive,    // compare the whole length-k window at every offset
};

struct LevelStep {
    std::uint64_t eta;
    std::uint64_t zeta;
};

/// Forward scheme over a lazily pulled source. Bits are pulled only as the
/// match search needs them and retained for random access.
class ForwardScheme {
public:
    explicit ForwardScheme(BitSource& source, MatchSearch search = MatchSearch::rolling)
        : source_(&source), search_(search) {
        pull_through(0);
        zetas_.push_back(0);
        tilde_.push_back(bits_[0]);
    }

    /// Extends the scheme from level k-1 to level k.
    LevelStep advance_level(std::uint64_t max_steps = kDefaultMaxSteps) {
        const std::size_t k = level() + 1;
        const std::uint64_t z = zetas_.back();
        const std::uint64_t eta = search_ == MatchSearch::rolling ? search_rolling(k, z, max_steps)
                                                                  : search_naive(k, z, max_steps);
        const std::uint64_t zeta = z + eta;

        // X_{zeta_{k-1}+1} is the successor sample that enters g from level k on.
        ones_ += bits_[z + 1];
        etas_.push_back(eta);
        zetas_.push_back(zeta);
        tilde_.push_back(bits_[zeta - k]);
        return {eta, zeta};
    }

    std::size_t level() const noexcept { return etas_.size(); }

    /// zeta_0 .. zeta_k
    std::span<const std::uint64_t> zetas() const noexcept { return zetas_; }
    /// eta_1 .. eta_k (element i-1 holds eta_i)
    std::span<const std::uint64_t> etas() const noexcept { return etas_; }

    std::uint64_t zeta() const noexcept { return zetas_.back(); }
    std::size_t ones_count() const noexcept { return ones_; }

    /// g_k = ones_count / k; undefined at level 0.
    double estimate_g() const {
        if (level() == 0) throw Error("estimate is undefined at level 0");
        return static_cast<double>(ones_) / static_cast<double>(level());
    }

    /// X_{zeta_j + 1}, the successor sampled at stopping time j (j < level()).
    Bit successor(std::size_t j) const { return bits_[zetas_.at(j) + 1]; }

    /// Tilde process X~_{-k} .. X~_0 where X~_{-n} = X_{zeta_n - n}.
    std::vector<Bit> tilde_view() const { return {tilde_.rbegin(), tilde_.rend()}; }

    /// X~_{-n} for n <= level().
    Bit tilde_at(std::size_t n) const { return tilde_.at(n); }

    /// The last `length` symbols of the shifted process X^(j), i.e. X_{zeta_j-length+1} .. X_{zeta_j},
    /// clipped at the start of the trajectory.
    std::vector<Bit> hat_view(std::size_t j, std::size_t length) const {
        const std::uint64_t end = zetas_.at(j);
        length = static_cast<std::size_t>(std::min<std::uint64_t>(length, end + 1));
        if (length == 0) return {};
        return bits_.slice(end + 1 - length, end);
    }

    const BitSequence& bits() const noexcept { return bits_; }

private:
    void pull_through(std::uint64_t index) {
        while (bits_.size() <= index) {
            auto b = source_->next();
            if (!b) throw SourceExhausted(bits_.size());
            bits_.push_back(*b);
        }
    }

    std::uint64_t search_naive(std::size_t k, std::uint64_t z, std::uint64_t max_steps) {
        for (std::uint64_t t = 1; t <= max_steps; ++t) {
            pull_through(z + t);
            if (bits_.blocks_equal(z + t, z, k)) return t;
        }
        throw SearchBudgetExceeded(k, max_steps);
    }

    std::uint64_t search_rolling(std::size_t k, std::uint64_t z, std::uint64_t max_steps) {
        const std::size_t width = std::min<std::size_t>(k, 64);
        const std::uint64_t mask = width == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
        const std::uint64_t target = bits_.window(z, width);
        std::uint64_t w = target;
        for (std::uint64_t t = 1; t <= max_steps; ++t) {
            const std::uint64_t e = z + t;
            pull_through(e);
            w = ((w << 1) | bits_[e]) & mask;
            if (w == target && (k <= 64 || bits_.blocks_equal(e - 64, z - 64, k - 64))) return t;
        }
        throw SearchBudgetExceeded(k, max_steps);
    }

    BitSource* source_;
    MatchSearch search_;
    BitSequence bits_;
    std::vector<std::uint64_t> zetas_;
    std::vector<std::uint64_t> etas_;
    std::vector<Bit> tilde_;  // tilde_[n] = X~_{-n}, fixed once level n completes
    std::size_t ones_ = 0;
};

/// Runs the forward scheme over a finite sequence until the data or k_max runs out.
/// Returns zeta_0 .. zeta_K for the deepest level K reached.
inline std::vector<std::uint64_t> forward_zetas(std::span<const Bit> x, std::size_t k_max,
                                                MatchSearch search = MatchSearch::rolling) {
    if (x.empty()) return {};
    FiniteSource src(std::vector<Bit>(x.begin(), x.end()));
    ForwardScheme scheme(src, search);
    try {
        while (scheme.level() < k_max) scheme.advance_level(x.size());
    } catch (const SourceExhausted&) {
    }
    return {scheme.zetas().begin(), scheme.zetas().end()};
}

struct BackwardState {
    std::size_t k = 0;
    std::vector<std::int64_t> hat_zetas;  // zeta^k_0 .. zeta^k_k, nonpositive, strictly decreasing
    std::vector<std::uint64_t> hat_etas;  // eta^k_1 .. eta^k_k
};

/// Backward scheme at level k over a finite history y_{-m} .. y_0, where
/// history.back() is y_0. Step i matches the block of length k-i+1.
inline BackwardState backward_scheme(std::span<const Bit> history, std::size_t k) {
    if (k == 0) throw Error("backward scheme needs k >= 1");
    if (history.empty()) throw HistoryExhausted(1);
    const std::int64_t m = static_cast<std::int64_t>(history.size()) - 1;
    auto y = [&](std::int64_t j) { return history[static_cast<std::size_t>(j + m)]; };

    BackwardState st;
    st.k = k;
    st.hat_zetas.push_back(0);
    for (std::size_t i = 1; i <= k; ++i) {
        const std::int64_t z = st.hat_zetas.back();
        const auto span_back = static_cast<std::int64_t>(k - i);  // block is y[z-span_back .. z]
        if (z - span_back < -m) throw HistoryExhausted(i);
        std::int64_t t = 1;
        for (;; ++t) {
            if (z - span_back - t < -m) throw HistoryExhausted(i);
            bool same = true;
            for (std::int64_t d = 0; d <= span_back; ++d) {
                if (y(z - d - t) != y(z - d)) {
                    same = false;
                    break;
                }
            }
            if (same) break;
        }
        st.hat_etas.push_back(static_cast<std::uint64_t>(t));
        st.hat_zetas.push_back(z - t);
    }
    return st;
}

/// Exact shift identity: if the forward scheme on x reaches zeta_k = l, the
/// backward scheme at level k on x_0..x_l (re-indexed so x_l sits at 0) ends at -l.
inline bool check_duality(std::span<const Bit> x, std::size_t k) {
    FiniteSource src(std::vector<Bit>(x.begin(), x.end()));
    ForwardScheme scheme(src);
    while (scheme.level() < k) scheme.advance_level(x.size());
    const std::uint64_t l = scheme.zeta();
    const BackwardState back = backward_scheme(x.first(static_cast<std::size_t>(l) + 1), k);
    return back.hat_zetas.back() == -static_cast<std::int64_t>(l);
}

/// Truncated d* distance sum_{i<depth} 2^{-i-1} [a_{-i} != b_{-i}].
/// Both spans are ordered (..., x_{-1}, x_0): back() is offset 0.
/// The neglected tail contributes at most 2^{-depth}.
inline double dstar_distance(std::span<const Bit> a, std::span<const Bit> b, std::size_t depth) {
    if (a.size() < depth || b.size() < depth) throw Error("dstar_distance: sequence shorter than depth");
    double d = 0.0;
    double w = 0.5;
    for (std::size_t i = 0; i < depth; ++i, w *= 0.5) {
        if (a[a.size() - 1 - i] != b[b.size() - 1 - i]) d += w;
    }
    return d;
}

}  // namespace forecast_lab
