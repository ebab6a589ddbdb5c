#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "tilt/numeric.hpp"
#include "tilt/random.hpp"

using namespace tilt;

TEST_CASE("kahan summation compensates cancellation", "[numeric]") {
    KahanSum<> acc;
    acc.add(1e16);
    acc.add(1.0);
    acc.add(-1e16);
    CHECK(acc.value() == 1.0);  // naive summation returns 0

    std::vector<double> tenths(1000000, 0.1);
    CHECK(kahan_sum(tenths) == Catch::Approx(100000.0).epsilon(1e-15));
}

TEST_CASE("deterministic_sum is identical for every thread count", "[numeric]") {
    Rng rng(77);
    std::size_t n = 100000;
    std::vector<double> values(n);
    for (auto& v : values) v = rng.uniform(-1e6, 1e6);

    auto f = [&](std::size_t i) { return values[i]; };
    double s1 = deterministic_sum(n, f, 1);
    double s2 = deterministic_sum(n, f, 2);
    double s4 = deterministic_sum(n, f, 4);
    double s9 = deterministic_sum(n, f, 9);
    CHECK(s1 == s2);
    CHECK(s1 == s4);
    CHECK(s1 == s9);
}

TEST_CASE("log_mean_exp is stable at extreme magnitudes", "[numeric]") {
    std::vector<double> constant(5, 42.5);
    CHECK(log_mean_exp(constant) == 42.5);

    std::vector<double> huge{1000.0, 999.0};
    double expected = 1000.0 + std::log((1.0 + std::exp(-1.0)) / 2.0);
    CHECK(log_mean_exp(huge) == Catch::Approx(expected).epsilon(1e-15));

    std::vector<double> spread{-1e8, 0.0, 1e8};
    CHECK(std::isfinite(log_mean_exp(spread)));
    CHECK(log_mean_exp(spread) <= 1e8);
}

TEST_CASE("softmax normalizes under extreme spread", "[numeric]") {
    std::vector<double> z{0.0, 700.0, -700.0, 350.0};
    auto w = softmax(std::span<const double>(z));
    double total = 0.0;
    for (double x : w) total += x;
    CHECK(total == Catch::Approx(1.0).margin(1e-12));
    CHECK(w[1] > 0.999999);
    CHECK(w[2] >= 0.0);
}

TEST_CASE("rng transforms are deterministic and in range", "[numeric]") {
    Rng a(123), b(123);
    for (int i = 0; i < 1000; ++i) {
        double u = a.uniform01();
        CHECK(u == b.uniform01());
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    Rng c(5);
    for (int i = 0; i < 100; ++i) {
        CHECK(c.exponential(2.0) >= 0.0);
        CHECK(c.below(7) < 7);
    }
}
