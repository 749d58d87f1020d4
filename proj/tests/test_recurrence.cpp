#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "forecast_lab/processes.hpp"
#include "forecast_lab/recurrence.hpp"
#include "forecast_lab/verify.hpp"

using namespace forecast_lab;
using verify::reference_forward_zetas;

namespace {

std::vector<std::uint64_t> run_levels(BitSource& src, std::size_t levels, MatchSearch search = MatchSearch::rolling) {
    ForwardScheme scheme(src, search);
    while (scheme.level() < levels) scheme.advance_level();
    return {scheme.zetas().begin(), scheme.zetas().end()};
}

std::vector<Bit> repeat(std::initializer_list<int> pattern, std::size_t n) {
    std::vector<Bit> out;
    while (out.size() < n)
        for (int b : pattern)
            if (out.size() < n) out.push_back(static_cast<Bit>(b));
    return out;
}

/// Periodic pattern with independent flips: long runs of near-matches that
/// exercise windows longer than one machine word.
class NoisyPeriodicSource final : public BitSource {
public:
    NoisyPeriodicSource(std::vector<Bit> pattern, double flip, std::uint64_t seed)
        : pattern_(std::move(pattern)), flip_(flip), rng_(seed) {}
    std::optional<Bit> next() override {
        Bit b = pattern_[pos_++ % pattern_.size()];
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < flip_) b ^= 1u;
        return b;
    }

private:
    std::vector<Bit> pattern_;
    double flip_;
    std::mt19937_64 rng_;
    std::size_t pos_ = 0;
};

}  // namespace

TEST_CASE("constant sequence recurs at every step", "[recurrence][advance_level]") {
    PeriodicSource ones{1};
    ForwardScheme scheme(ones);
    for (std::size_t k = 1; k <= 20; ++k) {
        const auto step = scheme.advance_level();
        CHECK(step.eta == 1);
        CHECK(step.zeta == k);
    }
}

TEST_CASE("alternating sequence has zeta_k = 2k", "[recurrence][advance_level]") {
    PeriodicSource alt{1, 0};
    const auto zetas = run_levels(alt, 3);
    CHECK(zetas == std::vector<std::uint64_t>{0, 2, 4, 6});
    CHECK(reference_forward_zetas(repeat({1, 0}, 64), 3) == zetas);
}

TEST_CASE("period-three sequence 0,1,1", "[recurrence][advance_level]") {
    PeriodicSource src{0, 1, 1};
    ForwardScheme scheme(src);
    auto s1 = scheme.advance_level();
    CHECK(s1.eta == 3);
    CHECK(s1.zeta == 3);
    auto s2 = scheme.advance_level();
    CHECK(s2.eta == 3);
    CHECK(s2.zeta == 6);
    CHECK(reference_forward_zetas(repeat({0, 1, 1}, 64), 2) == std::vector<std::uint64_t>{0, 3, 6});
}

TEST_CASE("estimate g_k", "[recurrence][estimate_g]") {
    SECTION("constant ones") {
        PeriodicSource src{1};
        ForwardScheme scheme(src);
        for (int i = 0; i < 5; ++i) scheme.advance_level();
        CHECK(scheme.estimate_g() == 1.0);
    }
    SECTION("alternating from 1: successors sit at odd positions") {
        PeriodicSource src{1, 0};
        ForwardScheme scheme(src);
        for (int i = 0; i < 4; ++i) scheme.advance_level();
        CHECK(scheme.estimate_g() == 0.0);
    }
    SECTION("period-three 0,1,1") {
        PeriodicSource src{0, 1, 1};
        ForwardScheme scheme(src);
        for (int i = 0; i < 3; ++i) scheme.advance_level();
        CHECK(scheme.estimate_g() == 1.0);
    }
    SECTION("undefined at level zero") {
        PeriodicSource src{1};
        ForwardScheme scheme(src);
        CHECK_THROWS_AS(scheme.estimate_g(), Error);
    }
}

TEST_CASE("g_k times k counts ones among sampled successors", "[recurrence][estimate_g]") {
    const auto spec = ProcessSpec::symmetric_markov(0.05);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        ProcessSource src(spec, seed);
        ForwardScheme scheme(src);
        for (int i = 0; i < 25; ++i) scheme.advance_level();
        std::size_t ones = 0;
        for (std::size_t j = 0; j < scheme.level(); ++j) ones += scheme.bits()[scheme.zetas()[j] + 1];
        CHECK(scheme.ones_count() == ones);
        CHECK(scheme.estimate_g() * static_cast<double>(scheme.level()) == static_cast<double>(ones));
    }
}

TEST_CASE("search budget and source exhaustion are reported", "[recurrence][errors]") {
    FiniteSource src{0, 1, 1, 1, 1, 1, 1, 1};
    ForwardScheme scheme(src);
    try {
        scheme.advance_level(3);
        FAIL("expected SearchBudgetExceeded");
    } catch (const SearchBudgetExceeded& e) {
        CHECK(e.level() == 1);
        CHECK(e.budget() == 3);
    }
    CHECK(scheme.level() == 0);
    CHECK_THROWS_AS(scheme.advance_level(100), SourceExhausted);
    CHECK(scheme.level() == 0);

    FiniteSource empty{};
    CHECK_THROWS_AS(ForwardScheme(empty), SourceExhausted);
}

TEST_CASE("structural invariants of the stopping times", "[recurrence][property]") {
    const auto spec = ProcessSpec::symmetric_markov(0.1);
    for (std::uint64_t seed = 100; seed < 140; ++seed) {
        ProcessSource src(spec, seed);
        ForwardScheme scheme(src);
        for (int i = 0; i < 22; ++i) scheme.advance_level();
        const auto z = scheme.zetas();
        const auto e = scheme.etas();
        REQUIRE(z[0] == 0);
        for (std::size_t i = 1; i < z.size(); ++i) {
            CHECK(e[i - 1] >= 1);
            CHECK(z[i] == z[i - 1] + e[i - 1]);
            CHECK(z[i] >= i);
            CHECK(scheme.bits().blocks_equal(z[i], z[i - 1], i));
        }
        // from-scratch recomputation on the retained trajectory
        CHECK(reference_forward_zetas(scheme.bits().to_vector(), 22) ==
              std::vector<std::uint64_t>(z.begin(), z.end()));
        CHECK(verify::block_match_valid(scheme.bits().to_vector(), z));
        // nothing past zeta_k was pulled
        CHECK(scheme.bits().size() == z.back() + 1);
    }
}

TEST_CASE("rolling search is bit-exact with the naive scan", "[recurrence][property]") {
    SECTION("random Markov trajectories") {
        const auto spec = ProcessSpec::symmetric_markov(0.03);
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            ProcessSource a(spec, seed), b(spec, seed);
            CHECK(run_levels(a, 30, MatchSearch::rolling) == run_levels(b, 30, MatchSearch::naive));
        }
    }
    SECTION("noisy periodic patterns reaching blocks longer than 64") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 12; ++trial) {
            std::vector<Bit> pattern(5 + trial * 7);
            for (auto& b : pattern) b = static_cast<Bit>(rng() & 1u);
            NoisyPeriodicSource a(pattern, 0.0004, 1000 + trial), b(pattern, 0.0004, 1000 + trial);
            ForwardScheme fast(a, MatchSearch::rolling), slow(b, MatchSearch::naive);
            bool fast_stopped = false, slow_stopped = false;
            for (int k = 0; k < 150 && !(fast_stopped && slow_stopped); ++k) {
                try { fast.advance_level(200'000); } catch (const SearchBudgetExceeded&) { fast_stopped = true; }
                try { slow.advance_level(200'000); } catch (const SearchBudgetExceeded&) { slow_stopped = true; }
                REQUIRE(fast_stopped == slow_stopped);
                REQUIRE(fast.level() == slow.level());
            }
            CHECK(std::vector<std::uint64_t>(fast.zetas().begin(), fast.zetas().end()) ==
                  std::vector<std::uint64_t>(slow.zetas().begin(), slow.zetas().end()));
            CHECK(fast.level() > 64);
        }
    }
    SECTION("suffix agreement of 64 symbols is not a match") {
        // Period-80 pattern whose second copy differs 70 symbols before each block end:
        // the last 64 symbols agree but longer blocks do not.
        std::mt19937_64 rng(21);
        std::vector<Bit> pattern(80);
        for (auto& b : pattern) b = static_cast<Bit>(rng() & 1u);
        std::vector<Bit> x;
        for (int rep = 0; rep < 40; ++rep) {
            auto copy = pattern;
            if (rep % 3 == 1) copy[10] ^= 1u;
            x.insert(x.end(), copy.begin(), copy.end());
        }
        CHECK(forward_zetas(x, 200, MatchSearch::rolling) == forward_zetas(x, 200, MatchSearch::naive));
        CHECK(forward_zetas(x, 200) == reference_forward_zetas(x, 200));
    }
}

TEST_CASE("backward scheme", "[recurrence][backward_scheme]") {
    SECTION("constant history steps back one symbol per level") {
        const std::vector<Bit> ones(11, 1);
        const auto st = backward_scheme(ones, 3);
        CHECK(st.hat_zetas == std::vector<std::int64_t>{0, -1, -2, -3});
        CHECK(st.hat_etas == std::vector<std::uint64_t>{1, 1, 1});
    }
    SECTION("alternating history ending in 1") {
        const std::vector<Bit> h{1, 0, 1, 0, 1};
        const auto st = backward_scheme(h, 2);
        CHECK(st.hat_zetas == std::vector<std::int64_t>{0, -2, -4});
    }
    SECTION("short history is reported with the failing level") {
        const std::vector<Bit> h{1, 0, 1};
        try {
            backward_scheme(h, 2);
            FAIL("expected HistoryExhausted");
        } catch (const HistoryExhausted& e) {
            CHECK(e.level() == 1);
        }
        CHECK_THROWS_AS(backward_scheme(std::vector<Bit>{1, 1}, 3), HistoryExhausted);
    }
    SECTION("hat zetas decrease strictly and every step is a minimal match") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Bit> h(3000);
            for (auto& b : h) b = static_cast<Bit>(rng() & 1u);
            const std::size_t k = 6;
            const auto st = backward_scheme(h, k);
            const auto m = static_cast<std::int64_t>(h.size()) - 1;
            auto y = [&](std::int64_t j) { return h[static_cast<std::size_t>(j + m)]; };
            for (std::size_t i = 1; i <= k; ++i) {
                const auto z = st.hat_zetas[i - 1];
                const auto t = static_cast<std::int64_t>(st.hat_etas[i - 1]);
                CHECK(st.hat_zetas[i] == z - t);
                const auto len = static_cast<std::int64_t>(k - i + 1);
                auto match = [&](std::int64_t s) {
                    for (std::int64_t d = 0; d < len; ++d)
                        if (y(z - d - s) != y(z - d)) return false;
                    return true;
                };
                CHECK(match(t));
                for (std::int64_t s = 1; s < t; ++s) CHECK_FALSE(match(s));
            }
        }
    }
}

TEST_CASE("forward/backward duality", "[recurrence][check_duality]") {
    CHECK(check_duality(repeat({1, 0}, 20), 2));
    for (std::size_t k = 1; k <= 10; ++k) CHECK(check_duality(std::vector<Bit>(12, 1), k));

    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Bit> x(2048);
        for (auto& b : x) b = static_cast<Bit>(rng() & 1u);
        const auto z = forward_zetas(x, 64);
        for (std::size_t k = 1; k < z.size(); ++k) CHECK(check_duality(x, k));
    }
}

TEST_CASE("duality needs enough data for the forward scheme", "[recurrence][check_duality]") {
    CHECK_THROWS_AS(check_duality(std::vector<Bit>{0, 1, 1}, 1), SourceExhausted);
}

TEST_CASE("tilde view", "[recurrence][tilde_view]") {
    SECTION("constant ones") {
        PeriodicSource src{1};
        ForwardScheme scheme(src);
        for (int i = 0; i < 6; ++i) scheme.advance_level();
        CHECK(scheme.tilde_view() == std::vector<Bit>(7, 1));
    }
    SECTION("alternating: X~_{-n} = x_n") {
        PeriodicSource src{1, 0};
        ForwardScheme scheme(src);
        for (int i = 0; i < 5; ++i) scheme.advance_level();
        // (X~_{-5}, ..., X~_0) = (x_5, ..., x_0)
        CHECK(scheme.tilde_view() == std::vector<Bit>{0, 1, 0, 1, 0, 1});
    }
    SECTION("entries are stable and match the trajectory blocks ending at each zeta_j") {
        const auto spec = ProcessSpec::symmetric_markov(0.05);
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            ProcessSource src(spec, seed);
            ForwardScheme scheme(src);
            std::vector<std::vector<Bit>> history;
            for (int i = 0; i < 30; ++i) {
                scheme.advance_level();
                history.push_back(scheme.tilde_view());
            }
            const auto final_view = scheme.tilde_view();
            for (const auto& earlier : history)
                CHECK(std::equal(earlier.begin(), earlier.end(), final_view.end() - static_cast<long>(earlier.size())));
            for (std::size_t j = 0; j <= scheme.level(); ++j) {
                const auto block = scheme.hat_view(j, j + 1);
                CHECK(std::equal(block.begin(), block.end(), final_view.end() - static_cast<long>(j + 1)));
            }
        }
    }
}

TEST_CASE("dstar distance", "[recurrence][dstar]") {
    const std::vector<Bit> a{0, 1, 1, 0, 1};
    CHECK(dstar_distance(a, a, 5) == 0.0);

    auto b = a;
    b.back() ^= 1u;
    CHECK(dstar_distance(a, b, 5) == 0.5);
    auto c = a;
    c.front() ^= 1u;
    CHECK(dstar_distance(a, c, 5) == std::ldexp(1.0, -5));
    CHECK(dstar_distance(a, c, 4) == 0.0);
    CHECK_THROWS_AS(dstar_distance(a, std::vector<Bit>{1}, 3), Error);

    SECTION("metric axioms on random triples") {
        std::mt19937_64 rng(99);
        const std::size_t depth = 40;
        for (int trial = 0; trial < 500; ++trial) {
            std::vector<Bit> x(depth), y(depth), z(depth);
            for (std::size_t i = 0; i < depth; ++i) {
                x[i] = static_cast<Bit>(rng() & 1u);
                y[i] = (rng() % 4 == 0) ? x[i] ^ 1u : x[i];
                z[i] = static_cast<Bit>(rng() & 1u);
            }
            const double xy = dstar_distance(x, y, depth), yx = dstar_distance(y, x, depth);
            CHECK(xy == yx);
            CHECK(xy >= 0.0);
            CHECK(xy <= 1.0);
            CHECK((xy == 0.0) == (x == y));
            CHECK(dstar_distance(x, z, depth) <= xy + dstar_distance(y, z, depth) + 1e-15);
        }
    }

    SECTION("tilde and shifted views agree up to 2^{-(j+1)}") {
        const auto spec = ProcessSpec::symmetric_markov(0.05);
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            ProcessSource src(spec, seed);
            ForwardScheme scheme(src);
            for (int i = 0; i < 25; ++i) scheme.advance_level();
            const auto tilde = scheme.tilde_view();
            for (std::size_t j = 0; j <= scheme.level(); ++j) {
                const auto hat = scheme.hat_view(j, tilde.size());
                const auto depth = std::min(hat.size(), tilde.size());
                CHECK(dstar_distance(tilde, hat, depth) <= std::ldexp(1.0, -static_cast<int>(j + 1)));
            }
        }
    }
}
