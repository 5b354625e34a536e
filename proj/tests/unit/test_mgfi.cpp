#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "abmflow/detail/rng.hpp"
#include "abmflow/mgfi.hpp"

using namespace abmflow;

namespace {

bool rows_identical(std::span<const double> a, std::span<const double> b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
    const FeatureTensor a(2, 2, {1.0, 0.0, 0.5, -0.5});
    SUBCASE("identical rows score 1") {
        const auto s = cosine_similarity_map(a, a);
        for (double v : s.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    }
    SUBCASE("antiparallel rows score -1") {
        FeatureTensor b = a;
        for (auto& x : b.data) x = -x;
        const auto s = cosine_similarity_map(a, b);
        for (double v : s.values) {
            CHECK(v == doctest::Approx(-1.0).epsilon(1e-15));
        }
    }
    SUBCASE("45 degrees scores 1/sqrt(2)") {
        const FeatureTensor u(1, 2, {1.0, 0.0});
        const FeatureTensor v(1, 2, {1.0, 1.0});
        const auto s = cosine_similarity_map(u, v);
        CHECK(s.values[0] == doctest::Approx(0.70710678118654746).epsilon(1e-12));
    }
    SUBCASE("zero-norm rows map to 0") {
        const FeatureTensor u(1, 2, {0.0, 0.0});
        const FeatureTensor v(1, 2, {1.0, 1.0});
        CHECK(cosine_similarity_map(u, v).values[0] == 0.0);
        CHECK(cosine_similarity_map(v, u).values[0] == 0.0);
    }
    SUBCASE("shape mismatch throws") {
        const FeatureTensor u(1, 2, {1.0, 0.0});
        const FeatureTensor v(2, 1, {1.0, 0.0});
        CHECK_THROWS_AS((void)cosine_similarity_map(u, v),
                        std::invalid_argument);
    }
}

TEST_CASE("threshold boundary is inclusive") {
    SimilarityMap s;
    s.values = {0.2, 0.1999, 1.0, -1.0, 0.200000001};
    const auto m = threshold_mask(s, 0.2);
    CHECK(m.bits == std::vector<std::uint8_t>{1, 0, 1, 0, 1});
    CHECK(m.density() == doctest::Approx(0.6));

    const auto all = threshold_mask(s, -1.0);
    CHECK(all.density() == 1.0);
    CHECK_THROWS_AS((void)threshold_mask(s, 1.5), std::invalid_argument);
}

TEST_CASE("masked blend selects whole rows") {
    const FeatureTensor inv(2, 2, {1.0, 1.0, 1.0, 1.0});
    const FeatureTensor smp(2, 2, {5.0, 5.0, 5.0, 5.0});
    BinaryMask m;
    m.bits = {1, 0};
    const auto out = masked_blend(m, inv, smp);
    CHECK(out.data == std::vector<double>{1.0, 1.0, 5.0, 5.0});

    m.bits = {1, 1};
    CHECK(masked_blend(m, inv, smp).data == inv.data);
    m.bits = {0, 0};
    CHECK(masked_blend(m, inv, smp).data == smp.data);

    m.bits = {1, 0, 0};
    CHECK_THROWS_AS((void)masked_blend(m, inv, smp), std::invalid_argument);
}

TEST_CASE("mgfi applies the current-step mask to the next step") {
    const FeatureTensor inv_next(2, 2, {1.0, 2.0, 3.0, 4.0});
    const FeatureTensor smp_next(2, 2, {-1.0, -2.0, -3.0, -4.0});

    SUBCASE("agreeing current pair keeps the inversion branch") {
        const FeatureTensor cur(2, 2, {0.5, 0.5, -0.5, 0.25});
        const auto out = mgfi_apply(cur, cur, inv_next, smp_next, 0.2);
        CHECK(out.data == inv_next.data);
    }
    SUBCASE("opposed current pair keeps the sampling branch") {
        const FeatureTensor cur(2, 2, {0.5, 0.5, -0.5, 0.25});
        FeatureTensor neg = cur;
        for (auto& x : neg.data) x = -x;
        const auto out = mgfi_apply(cur, neg, inv_next, smp_next, 0.2);
        CHECK(out.data == smp_next.data);
    }
    SUBCASE("mixed similarities split by row") {
        const FeatureTensor a(2, 2, {1.0, 0.0, 0.0, 1.0});
        const FeatureTensor b(2, 2, {1.0, 0.0, 0.0, -1.0});  // sims 1, -1
        const auto out = mgfi_apply(a, b, inv_next, smp_next, 0.2);
        CHECK(out.data == std::vector<double>{1.0, 2.0, -3.0, -4.0});
    }
}

TEST_CASE("invariants over seeded random pairs") {
    detail::Rng pick(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const int p = 1 + static_cast<int>(pick.next_u64() % 64);
        const int c = 1 + static_cast<int>(pick.next_u64() % 16);
        const auto a = random_tensor(p, c, pick.next_u64());
        const auto b = random_tensor(p, c, pick.next_u64());

        const auto s = cosine_similarity_map(a, b);
        for (double v : s.values) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }

        // selection exactness: each output row is bit-identical to an input
        const double tau = -1.0 + 2.0 * pick.uniform();
        const auto mask = threshold_mask(s, tau);
        const auto blended = masked_blend(mask, a, b);
        for (int row = 0; row < p; ++row) {
            CHECK((rows_identical(blended.row(row), a.row(row)) ||
                   rows_identical(blended.row(row), b.row(row))));
        }

        // threshold monotonicity: a larger tau never adds ones
        const auto loose = threshold_mask(s, -0.25);
        const auto tight = threshold_mask(s, 0.75);
        for (std::size_t i = 0; i < loose.bits.size(); ++i) {
            CHECK(tight.bits[i] <= loose.bits[i]);
        }

        // scale invariance of the similarity
        const double scale = std::exp(4.0 * (pick.uniform() - 0.5));
        FeatureTensor scaled = a;
        for (auto& x : scaled.data) x *= scale;
        const auto s2 = cosine_similarity_map(scaled, b);
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            CHECK(std::abs(s.values[i] - s2.values[i]) <= 1e-12);
        }

        // idempotence: equal next-step tensors pass through any mask
        const auto same = mgfi_apply(a, b, b, b, tau);
        CHECK(same.data == b.data);
    }
}

TEST_CASE("perturbation magnitude drives mask density down") {
    const auto base = random_tensor(48, 8, 99);
    double prev = 1.1;
    for (double mag : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
        const auto moved = perturbed_copy(base, mag, 7);
        const auto mask =
            threshold_mask(cosine_similarity_map(base, moved), kDefaultTau);
        CHECK(mask.density() <= prev);
        prev = mask.density();
    }
    // zero magnitude is the identity
    CHECK(perturbed_copy(base, 0.0, 7).data == base.data);
    CHECK_THROWS_AS((void)perturbed_copy(random_tensor(4, 1, 1), 1.0, 7),
                    std::invalid_argument);
}

TEST_CASE("perturbed rows hit the requested similarity") {
    const auto base = random_tensor(32, 8, 5);
    const double mag = 1.2;
    const auto moved = perturbed_copy(base, mag, 11);
    const auto s = cosine_similarity_map(base, moved);
    // angles are mag * u with u in [0.5, 1]
    for (double v : s.values) {
        CHECK(v <= std::cos(0.5 * mag) + 1e-12);
        CHECK(v >= std::cos(mag) - 1e-12);
    }
}

TEST_CASE("tensor text format round trips") {
    const auto t = random_tensor(5, 3, 42);
    std::stringstream ss;
    write_tensor(ss, t);
    const auto back = read_tensor(ss);
    CHECK(back.positions == t.positions);
    CHECK(back.channels == t.channels);
    CHECK(back.data == t.data);  // %.17g round-trips doubles exactly

    std::stringstream header;
    write_tensor(header, t);
    std::string first_line;
    std::getline(header, first_line);
    CHECK(first_line == "5 3");

    std::stringstream bad("2 2\n1.0 2.0\n");
    CHECK_THROWS_AS((void)read_tensor(bad), std::runtime_error);
}

TEST_CASE("mask text format round trips") {
    BinaryMask m;
    m.bits = {1, 0, 1, 1, 0};
    std::stringstream ss;
    write_mask(ss, m);
    CHECK(ss.str() == "10110\n");
    const auto back = read_mask(ss);
    CHECK(back.bits == m.bits);

    std::stringstream bad("10x1\n");
    CHECK_THROWS_AS((void)read_mask(bad), std::runtime_error);
}

TEST_CASE("tensors validate their shape and contents") {
    CHECK_THROWS_AS(FeatureTensor(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(FeatureTensor(1, 2, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(
        FeatureTensor(1, 2, {1.0, std::numeric_limits<double>::infinity()}),
        std::invalid_argument);
}
