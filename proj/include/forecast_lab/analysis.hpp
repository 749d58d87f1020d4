#pragma once

// Multi-seed experiments over the forward scheme and the statistics that turn
// its asymptotic guarantees into finite-sample frequency checks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "processes.hpp"
#include "recurrence.hpp"

namespace forecast_lab {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of run `run_id`: splitmix64(master ^ splitmix64(run_id)).
inline std::uint64_t derive_run_seed(std::uint64_t master_seed, std::uint64_t run_id) noexcept {
    return splitmix64(master_seed ^ splitmix64(run_id));
}

struct ExperimentConfig {
    ProcessSpec spec = ProcessSpec::symmetric_markov(0.05);
    std::size_t runs = 100;
    std::uint64_t master_seed = 20240601;
    std::size_t k_max = 50;
    std::uint64_t max_steps = kDefaultMaxSteps;
    double epsilon = 0.2;
    std::size_t marginal_depth = 3;

    void validate() const {
        if (runs < 1) throw ConfigError("runs must be >= 1");
        if (k_max < 1) throw ConfigError("k_max must be >= 1");
        if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
        if (marginal_depth < 1 || marginal_depth > 12) throw ConfigError("marginal_depth must be in 1..12");
    }
};

/// One (run, level) row.
struct ExperimentRecord {
    std::size_t run_id = 0;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    std::uint64_t zeta_k = 0;
    std::uint64_t eta_k = 0;
    double g_k = 0.0;
    double oracle_p = 0.0;       // P(X_{zeta_k+1} = 1 | X_0^{zeta_k})
    double abs_err = 0.0;
    double growth = 0.0;         // log2(zeta_k) / k
    double gamma_partial = 0.0;  // (1/k) sum_{j<k} (X_{zeta_j+1} - P(X_{zeta_j+1}=1 | past))
    bool truncated = false;      // the run hit its search budget at some later level
    Bit successor = 0;           // X_{zeta_{k-1}+1}
};

struct RunResult {
    std::size_t run_id = 0;
    std::uint64_t seed = 0;
    std::vector<ExperimentRecord> records;  // levels 1..K in order
    std::vector<Bit> tilde;                 // X~_{-K} .. X~_0
    std::vector<Bit> endpoints;             // X_{zeta_0} .. X_{zeta_K}
    bool truncated = false;
    std::size_t failed_level = 0;           // level whose search exhausted the budget, if truncated

    std::size_t levels() const noexcept { return records.size(); }
};

/// Called after each completed level with the scheme and the level's record.
using LevelObserver = std::function<void(const ForwardScheme&, const ExperimentRecord&)>;

/// Runs one trajectory to k_max (or until the budget) and evaluates the exact
/// oracle on the observed prefix at every stopping time.
inline RunResult run_single(const ProcessSpec& spec, std::size_t run_id, std::uint64_t seed,
                            std::size_t k_max, std::uint64_t max_steps, const LevelObserver& observer = {}) {
    RunResult out;
    out.run_id = run_id;
    out.seed = seed;

    ProcessSource source(spec, seed);
    ForwardScheme scheme(source);
    ConditionalOracle oracle(spec);

    const BitSequence& bits = scheme.bits();
    auto feed_through = [&](std::uint64_t index) {
        while (oracle.observed() <= index) oracle.observe(bits[oracle.observed()]);
    };

    feed_through(0);
    std::vector<double> oracle_at_stop{oracle.prob_one()};
    out.endpoints.push_back(bits[0]);
    double gamma_sum = 0.0;

    for (std::size_t k = 1; k <= k_max; ++k) {
        LevelStep step{};
        try {
            step = scheme.advance_level(max_steps);
        } catch (const SearchBudgetExceeded&) {
            out.truncated = true;
            out.failed_level = k;
            break;
        }
        const Bit succ = scheme.successor(k - 1);
        gamma_sum += static_cast<double>(succ) - oracle_at_stop[k - 1];

        feed_through(step.zeta);
        const double p = oracle.prob_one();
        oracle_at_stop.push_back(p);
        out.endpoints.push_back(bits[step.zeta]);

        ExperimentRecord r;
        r.run_id = run_id;
        r.seed = seed;
        r.k = k;
        r.zeta_k = step.zeta;
        r.eta_k = step.eta;
        r.g_k = scheme.estimate_g();
        r.oracle_p = p;
        r.abs_err = std::abs(r.g_k - p);
        r.growth = std::log2(static_cast<double>(step.zeta)) / static_cast<double>(k);
        r.gamma_partial = gamma_sum / static_cast<double>(k);
        r.successor = succ;
        out.records.push_back(r);
        if (observer) observer(scheme, r);
    }
    if (out.truncated)
        for (auto& r : out.records) r.truncated = true;
    out.tilde = scheme.tilde_view();
    return out;
}

inline std::size_t default_jobs() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : n;
}

/// All runs of an experiment, indexed by run_id. Deterministic in
/// (config, master_seed) regardless of the worker count.
inline std::vector<RunResult> run_experiment_runs(const ExperimentConfig& config, std::size_t jobs = default_jobs()) {
    config.validate();
    std::vector<RunResult> results(config.runs);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t id = next.fetch_add(1);
            if (id >= config.runs) return;
            try {
                results[id] = run_single(config.spec, id, derive_run_seed(config.master_seed, id),
                                         config.k_max, config.max_steps);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(config.runs);
                return;
            }
        }
    };

    jobs = std::clamp<std::size_t>(jobs, 1, config.runs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (std::size_t i = 0; i < jobs; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

/// Records of every run, canonically sorted by (run_id, k).
inline std::vector<ExperimentRecord> flatten_records(const std::vector<RunResult>& runs) {
    std::vector<ExperimentRecord> out;
    for (const auto& r : runs) out.insert(out.end(), r.records.begin(), r.records.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.run_id != b.run_id ? a.run_id < b.run_id : a.k < b.k;
    });
    return out;
}

inline std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& config, std::size_t jobs = default_jobs()) {
    return flatten_records(run_experiment_runs(config, jobs));
}

namespace detail {

/// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& v, double q) {
    if (v.empty()) return std::nan("");
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <class F>
std::map<std::size_t, std::vector<double>> group_by_level(const std::vector<ExperimentRecord>& records, F value) {
    std::map<std::size_t, std::vector<double>> by_k;
    for (const auto& r : records) by_k[r.k].push_back(value(r));
    return by_k;
}

}  // namespace detail

struct ErrorPoint {
    std::size_t k;
    double mean_abs_err;
    double median_abs_err;
    std::size_t count;
};

/// Per-level error of g_k against the exact conditional, over runs that reached the level.
inline std::vector<ErrorPoint> error_curve(const std::vector<ExperimentRecord>& records) {
    if (records.empty()) throw Error("error_curve needs records");
    std::vector<ErrorPoint> out;
    for (auto& [k, errs] : detail::group_by_level(records, [](const auto& r) { return r.abs_err; })) {
        double sum = 0.0;
        for (double e : errs) sum += e;
        std::sort(errs.begin(), errs.end());
        out.push_back({k, sum / static_cast<double>(errs.size()), detail::quantile_sorted(errs, 0.5), errs.size()});
    }
    return out;
}

struct GrowthPoint {
    std::size_t k;
    double violation_fraction;  // share of runs with zeta_k >= 2^{k(H+eps)}
    double q05, q25, median, q75, q95;  // quantiles of log2(zeta_k)/k
    std::size_t count;
};

inline std::vector<GrowthPoint> growth_stats(const std::vector<ExperimentRecord>& records, double entropy,
                                             double epsilon) {
    std::vector<GrowthPoint> out;
    for (auto& [k, g] : detail::group_by_level(records, [](const auto& r) { return r.growth; })) {
        // zeta_k >= 2^{k(H+eps)}  <=>  log2(zeta_k)/k >= H + eps
        const double threshold = entropy + epsilon;
        std::size_t violations = 0;
        for (double v : g)
            if (v >= threshold) ++violations;
        std::sort(g.begin(), g.end());
        using detail::quantile_sorted;
        out.push_back({k, static_cast<double>(violations) / static_cast<double>(g.size()), quantile_sorted(g, 0.05),
                       quantile_sorted(g, 0.25), quantile_sorted(g, 0.5), quantile_sorted(g, 0.75),
                       quantile_sorted(g, 0.95), g.size()});
    }
    return out;
}

/// Same statistics over whole runs. A run truncated before level k still counts
/// towards the violation fraction when its budget alone pushes zeta_k past the
/// threshold; otherwise its status at k is unknown and it is left out. Quantiles
/// use completed levels only.
inline std::vector<GrowthPoint> growth_stats(const std::vector<RunResult>& runs, double entropy, double epsilon,
                                             std::uint64_t max_steps) {
    std::vector<GrowthPoint> out;
    for (auto pt : growth_stats(flatten_records(runs), entropy, epsilon)) {
        const double threshold = entropy + epsilon;
        std::size_t n = 0, violations = 0;
        for (const auto& r : runs) {
            if (r.levels() >= pt.k) {
                ++n;
                if (r.records[pt.k - 1].growth >= threshold) ++violations;
            } else if (r.truncated) {
                const std::uint64_t before = r.levels() == 0 ? 0 : r.records.back().zeta_k;
                const double bound = std::log2(static_cast<double>(before + max_steps + 1)) / static_cast<double>(pt.k);
                if (bound >= threshold) {
                    ++n;
                    ++violations;
                }
            }
        }
        pt.count = n;
        pt.violation_fraction = n == 0 ? std::nan("") : static_cast<double>(violations) / static_cast<double>(n);
        out.push_back(pt);
    }
    return out;
}

inline double azuma_envelope(double epsilon, std::size_t k) {
    return 2.0 * std::exp(-epsilon * epsilon * static_cast<double>(k) / 2.0);
}

/// Three-sigma Monte Carlo slack for a frequency q estimated from n runs.
inline double monte_carlo_slack(double q, std::size_t n) {
    return 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(n));
}

struct Exceedance {
    double epsilon;
    double frequency;  // empirical P(|gamma_partial| > epsilon)
    double envelope;   // 2 exp(-eps^2 k / 2)
    double slack;
    bool within;       // frequency <= envelope + slack
};

struct MartingalePoint {
    std::size_t k;
    double mean_abs_gamma;
    std::size_t count;
    std::vector<Exceedance> exceedances;
};

struct MartingaleCheck {
    std::vector<MartingalePoint> points;
    std::vector<std::size_t> skipped_levels;  // k < memory, where the check is not applied

    bool all_within() const {
        for (const auto& p : points)
            for (const auto& e : p.exceedances)
                if (!e.within) return false;
        return true;
    }
};

/// Azuma comparison of the averaged martingale differences, for a process whose
/// conditional depends on the last `memory` symbols.
inline MartingaleCheck martingale_check(const std::vector<ExperimentRecord>& records, std::size_t memory,
                                        std::vector<double> epsilons = {0.1, 0.2, 0.3}) {
    MartingaleCheck out;
    for (auto& [k, g] : detail::group_by_level(records, [](const auto& r) { return r.gamma_partial; })) {
        if (k < memory) {
            out.skipped_levels.push_back(k);
            continue;
        }
        MartingalePoint pt{k, 0.0, g.size(), {}};
        for (double v : g) pt.mean_abs_gamma += std::abs(v);
        pt.mean_abs_gamma /= static_cast<double>(g.size());
        for (double eps : epsilons) {
            std::size_t hits = 0;
            for (double v : g)
                if (std::abs(v) > eps) ++hits;
            const double q = static_cast<double>(hits) / static_cast<double>(g.size());
            const double env = azuma_envelope(eps, k);
            const double slack = monte_carlo_slack(q, g.size());
            pt.exceedances.push_back({eps, q, env, slack, q <= env + slack});
        }
        out.points.push_back(std::move(pt));
    }
    return out;
}

/// Defined only where the conditional given the infinite past is exactly available.
inline MartingaleCheck martingale_check(const std::vector<ExperimentRecord>& records, const ProcessSpec& spec,
                                        std::vector<double> epsilons = {0.1, 0.2, 0.3}) {
    const auto memory = spec.memory();
    if (!memory) throw Error("martingale check needs a Bernoulli or Markov spec");
    return martingale_check(records, *memory, std::move(epsilons));
}

struct TvCheck {
    std::size_t block_length;
    std::size_t samples;
    double tv;
    std::vector<double> empirical;  // indexed by block, X~_{-m+1} as the most significant bit
    std::vector<double> exact;
};

/// Total-variation distance between the empirical law of (X~_{-m+1}, ..., X~_0),
/// one sample per run, and the exact m-block marginal.
inline TvCheck marginal_tv_check(const std::vector<RunResult>& runs, const ProcessSpec& spec, std::size_t m) {
    if (m < 1 || m > 12) throw Error("block length must be in 1..12");
    const std::size_t cells = std::size_t{1} << m;
    std::vector<double> counts(cells, 0.0);
    std::size_t samples = 0;
    for (const auto& r : runs) {
        if (r.tilde.size() < m) continue;
        std::size_t idx = 0;
        for (std::size_t i = r.tilde.size() - m; i < r.tilde.size(); ++i) idx = (idx << 1) | r.tilde[i];
        counts[idx] += 1.0;
        ++samples;
    }
    if (samples < 100 * cells) throw InsufficientRuns("marginal TV check needs at least 100 * 2^m samples");

    TvCheck out{m, samples, 0.0, std::vector<double>(cells), std::vector<double>(cells)};
    std::vector<Bit> block(m);
    for (std::size_t idx = 0; idx < cells; ++idx) {
        for (std::size_t i = 0; i < m; ++i) block[i] = static_cast<Bit>((idx >> (m - 1 - i)) & 1u);
        out.exact[idx] = marginal_prob(spec, block);
        out.empirical[idx] = counts[idx] / static_cast<double>(samples);
        out.tv += std::abs(out.empirical[idx] - out.exact[idx]);
    }
    out.tv *= 0.5;
    return out;
}

struct CompletionPoint {
    std::size_t k;
    std::size_t completed;
    double fraction;
};

inline std::vector<CompletionPoint> completion_counts(const std::vector<RunResult>& runs, std::size_t k_max) {
    std::vector<CompletionPoint> out;
    for (std::size_t k = 1; k <= k_max; ++k) {
        std::size_t n = 0;
        for (const auto& r : runs)
            if (r.levels() >= k) ++n;
        out.push_back({k, n, static_cast<double>(n) / static_cast<double>(runs.size())});
    }
    return out;
}

struct SummaryStats {
    EntropyEstimate entropy{};
    std::vector<ErrorPoint> error_curve;
    std::vector<GrowthPoint> growth;
    std::optional<MartingaleCheck> martingale;  // absent for HMM specs
    std::optional<TvCheck> tv;                  // absent when there are too few runs
    std::vector<CompletionPoint> completion;
};

inline SummaryStats summarize(const ExperimentConfig& config, const std::vector<RunResult>& runs,
                              const SmbOptions& smb = {}) {
    SummaryStats s;
    s.entropy = entropy_rate(config.spec, smb);
    const auto records = flatten_records(runs);
    if (!records.empty()) {
        s.error_curve = error_curve(records);
        s.growth = growth_stats(runs, s.entropy.rate, config.epsilon, config.max_steps);
        if (config.spec.memory()) s.martingale = martingale_check(records, config.spec);
    }
    try {
        s.tv = marginal_tv_check(runs, config.spec, config.marginal_depth);
    } catch (const InsufficientRuns&) {
    }
    s.completion = completion_counts(runs, config.k_max);
    return s;
}

}  // namespace forecast_lab
