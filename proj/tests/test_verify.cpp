#include <catch_amalgamated.hpp>

#include "forecast_lab/verify.hpp"

using namespace forecast_lab;

namespace {

// Matches blocks one symbol too short.
std::vector<std::uint64_t> short_block_forward(std::span<const Bit> x, std::size_t k_max) {
    std::vector<std::uint64_t> zetas{0};
    for (std::size_t k = 1; k <= k_max; ++k) {
        const std::uint64_t z = zetas.back();
        bool found = false;
        for (std::uint64_t e = z + 1; e < x.size() && !found; ++e) {
            bool same = true;
            for (std::uint64_t d = 0; d + 1 < k && same; ++d) same = e >= d && z >= d && x[e - d] == x[z - d];
            if (same) {
                zetas.push_back(e);
                found = true;
            }
        }
        if (!found) break;
    }
    return zetas;
}

// Forward filter that propagates with T(j, i) instead of T(i, j).
double transposed_filter(const ProcessSpec& spec, std::span<const Bit> prefix) {
    const auto& h = std::get<BinaryHMM>(spec.variant());
    const auto n = h.transition.rows();
    Eigen::VectorXd alpha = Eigen::Map<const Eigen::VectorXd>(h.initial.data(), n);
    for (Bit b : prefix) {
        for (Eigen::Index s = 0; s < n; ++s) alpha(s) *= b ? h.emission[s] : 1.0 - h.emission[s];
        alpha = h.transition * alpha;
        alpha /= alpha.sum();
    }
    double p = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) p += alpha(s) * h.emission[s];
    return p;
}

}  // namespace

TEST_CASE("verification suites pass on the library", "[verify]") {
    for (const auto& r : verify::run_all()) {
        INFO(r.name << ": " << r.first_failure);
        CHECK(r.cases > 0);
        CHECK(r.passed());
    }
}

TEST_CASE("reference scanner agrees with hand examples", "[verify]") {
    CHECK(verify::reference_forward_zetas({0, 0, 0, 0}, 3) == std::vector<std::uint64_t>{0, 1, 2, 3});
    CHECK(verify::reference_forward_zetas({0, 1, 0, 1, 0, 1}, 3) == std::vector<std::uint64_t>{0, 2, 4});
    CHECK(verify::reference_forward_zetas({}, 3).empty());
    CHECK(verify::block_match_valid({0, 1, 0, 1, 0, 1}, std::vector<std::uint64_t>{0, 2, 4}));
    CHECK_FALSE(verify::block_match_valid({0, 1, 0, 1, 0, 1}, std::vector<std::uint64_t>{0, 3}));
}

TEST_CASE("suites catch a matcher with the wrong block length", "[verify][mutation]") {
    const auto duality = verify::duality_suite(200, 1024, 1, short_block_forward);
    CHECK_FALSE(duality.passed());
    CHECK_FALSE(duality.first_failure.empty());
    CHECK_FALSE(verify::block_match_suite(50, 1024, 2, short_block_forward).passed());
}

TEST_CASE("filter suite catches a transposed transition matrix", "[verify][mutation]") {
    const auto r = verify::filter_suite(50, 10, 4, transposed_filter);
    CHECK_FALSE(r.passed());
    CHECK(r.failures > r.cases / 2);
}
