#include <catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "forecast_lab/bits.hpp"

using namespace forecast_lab;

TEST_CASE("BitSequence stores symbols across word boundaries", "[bits]") {
    std::mt19937_64 rng(17);
    std::vector<Bit> ref;
    BitSequence seq;
    for (int i = 0; i < 1000; ++i) {
        const Bit b = static_cast<Bit>(rng() & 1u);
        ref.push_back(b);
        seq.push_back(b);
    }
    REQUIRE(seq.size() == ref.size());
    REQUIRE(seq.to_vector() == ref);

    std::size_t ones = 0;
    for (Bit b : ref) ones += b;
    REQUIRE(seq.count_ones() == ones);
}

TEST_CASE("BitSequence window packs the newest symbol lowest", "[bits]") {
    BitSequence seq{1, 0, 1, 1, 0};
    CHECK(seq.window(4, 1) == 0b0);
    CHECK(seq.window(3, 3) == 0b011);
    CHECK(seq.window(4, 5) == 0b10110);

    // windows straddling a word boundary agree with a plain reconstruction
    std::mt19937_64 rng(3);
    BitSequence big;
    for (int i = 0; i < 300; ++i) big.push_back(static_cast<Bit>(rng() & 1u));
    for (std::size_t end : {63u, 64u, 65u, 127u, 200u}) {
        for (std::size_t len : {1u, 7u, 33u, 64u}) {
            std::uint64_t want = 0;
            for (std::size_t i = end + 1 - len; i <= end; ++i) want = (want << 1) | big[i];
            CHECK(big.window(end, len) == want);
        }
    }
}

TEST_CASE("BitSequence block comparison", "[bits]") {
    BitSequence seq{0, 1, 1, 0, 1, 1, 0};
    CHECK(seq.blocks_equal(2, 5, 3));   // 011 == 011
    CHECK_FALSE(seq.blocks_equal(3, 5, 2));  // 10 vs 11
    CHECK(seq.slice(1, 3) == std::vector<Bit>{1, 1, 0});
}

TEST_CASE("FiniteSource signals exhaustion instead of inventing symbols", "[bits]") {
    FiniteSource src{1, 0};
    CHECK(src.next() == Bit{1});
    CHECK(src.next() == Bit{0});
    CHECK_FALSE(src.next().has_value());
    CHECK_FALSE(src.next().has_value());
}

TEST_CASE("PeriodicSource repeats its pattern", "[bits]") {
    PeriodicSource src{0, 1, 1};
    std::vector<Bit> got;
    for (int i = 0; i < 7; ++i) got.push_back(*src.next());
    CHECK(got == std::vector<Bit>{0, 1, 1, 0, 1, 1, 0});
    CHECK_THROWS_AS(PeriodicSource(std::vector<Bit>{}), InvalidSpec);
}
