#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "abmflow/fields.hpp"

using namespace abmflow;

TEST_CASE("constant field evaluates to its vector everywhere") {
    const auto f = make_constant_field({2.0});
    CHECK(f({1.0}, 0.3) == Vec{2.0});
    CHECK(f({-7.5}, 0.0) == Vec{2.0});
}

TEST_CASE("decay field flips the sign of the state") {
    const auto f = make_decay_field(2);
    CHECK(f({1.0, -2.0}, 0.5) == Vec{-1.0, 2.0});
}

TEST_CASE("rectified field is the constant endpoint difference") {
    const auto f = make_rectified_field({{0.0, 0.0}, {1.0, 3.0}});
    CHECK(f({0.4, 0.9}, 0.1) == Vec{1.0, 3.0});
    CHECK(f({-2.0, 5.0}, 0.9) == Vec{1.0, 3.0});
}

TEST_CASE("evaluate is deterministic under repeated calls") {
    const auto f = make_surrogate_field(4);
    const Vec z = {0.3, -1.2, 2.5, 0.0};
    const Vec a = f(z, 0.37);
    for (int i = 0; i < 5; ++i) CHECK(f(z, 0.37) == a);
}

TEST_CASE("evaluate rejects bad inputs") {
    const auto f = make_decay_field(2);
    CHECK_THROWS_AS((void)f({1.0}, 0.5), std::invalid_argument);
    CHECK_THROWS_AS((void)f({1.0, 2.0}, 1.5), std::domain_error);
    CHECK_THROWS_AS((void)f({1.0, 2.0}, -0.1), std::domain_error);
    // endpoint slack for accumulated rounding
    CHECK_NOTHROW((void)f({1.0, 2.0}, 1.0 + 0.5e-12));
}

TEST_CASE("exact flow map is the identity over an empty span") {
    for (const auto& name : field_catalog()) {
        const auto f = field_by_name(name, 3);
        if (!f.has_exact()) continue;
        Vec z(static_cast<std::size_t>(f.dim()));
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = 0.7 - 0.45 * static_cast<double>(i);
        }
        const Vec r = f.exact(z, 0.4, 0.4);
        for (std::size_t i = 0; i < z.size(); ++i) {
            CHECK(r[i] == doctest::Approx(z[i]).epsilon(1e-15));
        }
    }
}

TEST_CASE("reference_solve reproduces e^-1 on the decay field") {
    const auto f = make_decay_field(1);
    const Vec r = reference_solve(f, Vec{1.0}, 0.0, 1.0, 100000);
    CHECK(r[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("reference_solve is exact on constant fields at any step count") {
    const auto f = make_constant_field({2.0});
    const Vec r = reference_solve(f, Vec{1.0}, 0.0, 1.0, 7);
    CHECK(r[0] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("reference_solve tracks the rotation closed form") {
    const auto f = make_rotation_field();
    const Vec r = reference_solve(f, Vec{1.0, 0.0}, 0.0, 1.0, 100000);
    CHECK(r[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
}

TEST_CASE("reference oracle agrees with every closed form to 1e-10") {
    for (const auto& name : field_catalog()) {
        const auto f = field_by_name(name, 8);
        if (!f.has_exact()) continue;
        Vec z0(static_cast<std::size_t>(f.dim()));
        for (std::size_t i = 0; i < z0.size(); ++i) {
            z0[i] = 0.4 + 0.3 * static_cast<double>(i);
        }
        const Vec truth = f.exact(z0, 0.0, 1.0);
        const Vec oracle = reference_solve(f, z0, 0.0, 1.0, 100000);
        for (std::size_t i = 0; i < z0.size(); ++i) {
            const double scale = std::max(1.0, std::abs(truth[i]));
            CHECK(std::abs(oracle[i] - truth[i]) / scale <= 1e-10);
        }
    }
}

TEST_CASE("reference_solve works backwards in time") {
    const auto f = make_decay_field(1);
    const Vec r = reference_solve(f, Vec{1.0}, 1.0, 0.0, 100000);
    CHECK(r[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("catalog rejects unknown names") {
    CHECK_THROWS_AS((void)field_by_name("nosuch", 2), std::invalid_argument);
}

TEST_CASE("lipschitz bound is exposed as metadata only") {
    CHECK(make_decay_field(1, 2.5).lipschitz_bound() == doctest::Approx(2.5));
    CHECK(make_surrogate_field(1).lipschitz_bound() == doctest::Approx(0.5));
    CHECK(!make_surrogate_field(1).has_exact());
}
