#pragma once

// Exact invariant suites shared by the test binaries and `forecast_lab verify`.
//
// The reference scanner and the path-enumeration oracle here are written
// against plain vectors and do not reuse the matcher or the forward filter.
// The suites take the implementation under test as a callable so a deliberately
// broken matcher or filter can be swapped in.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "processes.hpp"
#include "recurrence.hpp"

namespace forecast_lab::verify {

/// Forward stopping times zeta_0..zeta_K of x up to level k_max.
using ForwardFn = std::function<std::vector<std::uint64_t>(std::span<const Bit>, std::size_t)>;
/// P(X_{n+1}=1 | prefix) under an HMM spec.
using FilterFn = std::function<double(const ProcessSpec&, std::span<const Bit>)>;

inline std::vector<std::uint64_t> library_forward(std::span<const Bit> x, std::size_t k_max) {
    return forward_zetas(x, k_max);
}

inline double library_filter(const ProcessSpec& spec, std::span<const Bit> prefix) {
    return oracle_conditional(spec, prefix);
}

/// Brute-force window scanner: for each level, tries every offset t = 1, 2, ...
/// and compares the two length-k windows symbol by symbol.
inline std::vector<std::uint64_t> reference_forward_zetas(const std::vector<Bit>& x, std::size_t k_max) {
    std::vector<std::uint64_t> zetas{0};
    if (x.empty()) return {};
    for (std::size_t k = 1; k <= k_max; ++k) {
        const std::uint64_t z = zetas.back();
        bool found = false;
        for (std::uint64_t e = z + 1; e < x.size(); ++e) {
            bool same = true;
            for (std::uint64_t d = 0; d < k; ++d)
                if (x[e - d] != x[z - d]) same = false;
            if (same) {
                zetas.push_back(e);
                found = true;
                break;
            }
        }
        if (!found) break;
    }
    return zetas;
}

/// True iff every (eta_i, zeta_i) is a genuine length-i match with no earlier match.
inline bool block_match_valid(const std::vector<Bit>& x, std::span<const std::uint64_t> zetas) {
    if (zetas.empty() || zetas[0] != 0) return false;
    for (std::size_t i = 1; i < zetas.size(); ++i) {
        const std::uint64_t z = zetas[i - 1];
        if (zetas[i] <= z || zetas[i] >= x.size() || z + 1 < i) return false;
        auto matches_at = [&](std::uint64_t e) {
            for (std::uint64_t d = 0; d < i; ++d)
                if (x[e - d] != x[z - d]) return false;
            return true;
        };
        if (!matches_at(zetas[i])) return false;
        for (std::uint64_t e = z + 1; e < zetas[i]; ++e)
            if (matches_at(e)) return false;
    }
    return true;
}

struct SuiteResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    std::string first_failure;

    bool passed() const noexcept { return cases > 0 && failures == 0; }
};

inline std::vector<Bit> random_bits(std::mt19937_64& rng, std::size_t n, double p = 0.5) {
    std::vector<Bit> x(n);
    for (auto& b : x) b = static_cast<Bit>(detail::uniform01(rng) < p);
    return x;
}

/// Forward/backward shift identity at the deepest reachable level of each sequence.
inline SuiteResult duality_suite(std::size_t sequences = 1000, std::size_t length = 4096, std::uint64_t seed = 1,
                                 const ForwardFn& forward = library_forward) {
    SuiteResult res{"duality", 0, 0, {}};
    std::mt19937_64 rng(seed);
    for (std::size_t s = 0; s < sequences; ++s) {
        const auto x = random_bits(rng, length);
        const auto zetas = forward(x, length);
        const std::size_t k = zetas.size() - 1;
        ++res.cases;
        bool ok = false;
        if (k >= 1) {
            const std::uint64_t l = zetas.back();
            try {
                const auto back = backward_scheme(std::span<const Bit>(x).first(l + 1), k);
                ok = back.hat_zetas.back() == -static_cast<std::int64_t>(l);
            } catch (const Error&) {
                ok = false;
            }
        }
        if (!ok) {
            if (res.failures++ == 0) res.first_failure = "sequence " + std::to_string(s) + " at level " + std::to_string(k);
        }
    }
    return res;
}

/// Matcher output against the brute-force scanner, plus direct validity of every level.
inline SuiteResult block_match_suite(std::size_t sequences = 300, std::size_t length = 4096, std::uint64_t seed = 2,
                                     const ForwardFn& forward = library_forward) {
    SuiteResult res{"block_match", 0, 0, {}};
    std::mt19937_64 rng(seed);
    const double probs[] = {0.5, 0.2, 0.05};
    for (std::size_t s = 0; s < sequences; ++s) {
        const auto x = random_bits(rng, length, probs[s % 3]);
        const auto got = forward(x, length);
        const auto want = reference_forward_zetas(x, length);
        ++res.cases;
        if (got != want || !block_match_valid(x, got)) {
            if (res.failures++ == 0) res.first_failure = "sequence " + std::to_string(s);
        }
    }
    return res;
}

/// X_{zeta_j - j} .. X_{zeta_j} equals (X~_{-j}, ..., X~_0), and the d* distance
/// between the tilde view and the shifted trajectory is at most 2^{-(j+1)}.
inline SuiteResult prefix_identity_suite(std::size_t runs = 200, std::size_t k_max = 30, std::uint64_t seed = 3) {
    SuiteResult res{"prefix_identity", 0, 0, {}};
    const ProcessSpec spec = ProcessSpec::symmetric_markov(0.05);
    for (std::size_t r = 0; r < runs; ++r) {
        ProcessSource src(spec, derive_run_seed(seed, r));
        ForwardScheme scheme(src);
        try {
            while (scheme.level() < k_max) scheme.advance_level();
        } catch (const SearchBudgetExceeded&) {
            // check the levels that were reached
        }
        const auto tilde = scheme.tilde_view();
        for (std::size_t j = 0; j <= scheme.level(); ++j) {
            ++res.cases;
            const auto hat = scheme.hat_view(j, j + 1);
            const std::span<const Bit> tail = std::span<const Bit>(tilde).last(j + 1);
            bool ok = std::equal(hat.begin(), hat.end(), tail.begin(), tail.end());
            const auto full_hat = scheme.hat_view(j, tilde.size());
            const std::size_t depth = std::min(tilde.size(), full_hat.size());
            ok = ok && dstar_distance(tilde, full_hat, depth) <= std::ldexp(1.0, -static_cast<int>(j + 1));
            if (!ok) {
                if (res.failures++ == 0) res.first_failure = "run " + std::to_string(r) + " level " + std::to_string(j);
            }
        }
    }
    return res;
}

/// Random HMM with strictly positive transitions and emissions in [0.05, 0.95].
inline ProcessSpec random_hmm(std::mt19937_64& rng, std::size_t states) {
    Matrix t(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
        double sum = 0.0;
        for (Eigen::Index j = 0; j < t.cols(); ++j) sum += (t(i, j) = 0.05 + detail::uniform01(rng));
        t.row(i) /= sum;
        t(i, t.cols() - 1) = 1.0 - (t.row(i).sum() - t(i, t.cols() - 1));
    }
    std::vector<double> e(states);
    for (auto& v : e) v = 0.05 + 0.9 * detail::uniform01(rng);
    return ProcessSpec::hmm(std::move(t), std::move(e));
}

/// Forward filter against hidden-path enumeration, 2- and 3-state models.
inline SuiteResult filter_suite(std::size_t prefixes = 50, std::size_t length = 10, std::uint64_t seed = 4,
                                const FilterFn& filter = library_filter, double tol = 1e-10) {
    SuiteResult res{"hmm_filter", 0, 0, {}};
    std::mt19937_64 rng(seed);
    for (std::size_t states : {2u, 3u}) {
        const ProcessSpec spec = random_hmm(rng, states);
        const auto& h = std::get<BinaryHMM>(spec.variant());
        for (std::size_t i = 0; i < prefixes; ++i) {
            const auto prefix = random_bits(rng, length);
            ++res.cases;
            const double got = filter(spec, prefix);
            const double want = brute_force_conditional(h, prefix);
            if (!(std::abs(got - want) <= tol)) {
                if (res.failures++ == 0)
                    res.first_failure = std::to_string(states) + "-state prefix " + std::to_string(i) + ": " +
                                        std::to_string(got) + " vs " + std::to_string(want);
            }
        }
    }
    return res;
}

/// p_n sums to one over all 2^n blocks.
inline SuiteResult marginal_normalization_suite(std::size_t n = 8, double tol = 1e-9, std::uint64_t seed = 5) {
    SuiteResult res{"marginal_normalization", 0, 0, {}};
    std::mt19937_64 rng(seed);
    std::vector<ProcessSpec> specs{ProcessSpec::bernoulli(0.3), ProcessSpec::symmetric_markov(0.05),
                                   ProcessSpec::markov(2, {0.1, 0.6, 0.3, 0.9}), random_hmm(rng, 2),
                                   random_hmm(rng, 3)};
    std::vector<Bit> block(n);
    for (const auto& spec : specs) {
        double total = 0.0;
        for (std::size_t idx = 0; idx < (std::size_t{1} << n); ++idx) {
            for (std::size_t i = 0; i < n; ++i) block[i] = static_cast<Bit>((idx >> i) & 1u);
            total += marginal_prob(spec, block);
        }
        ++res.cases;
        if (!(std::abs(total - 1.0) <= tol)) {
            if (res.failures++ == 0) res.first_failure = "sum = " + std::to_string(total);
        }
    }
    return res;
}

inline std::vector<SuiteResult> run_all() {
    return {duality_suite(), block_match_suite(), prefix_identity_suite(), filter_suite(),
            marginal_normalization_suite()};
}

}  // namespace forecast_lab::verify
