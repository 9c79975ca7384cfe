#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sidet/amplitude_stats.hpp"
#include "oracle.hpp"

using namespace sidet;

TEST_CASE("log_bessel_i0 matches the high-precision reference grid") {
    for (const auto& [x, expected] : oracle::kLogBesselI0) {
        const double got = log_bessel_i0(x);
        REQUIRE_THAT(got, Catch::Matchers::WithinRel(expected, 1e-10));
    }
}

TEST_CASE("log_bessel_i0 point values and edge cases") {
    CHECK(log_bessel_i0(0.0) == 0.0);
    CHECK_THAT(log_bessel_i0(1.0), Catch::Matchers::WithinRel(oracle::kLnI0At1, 1e-12));
    CHECK_THAT(log_bessel_i0(2.0), Catch::Matchers::WithinRel(oracle::kLnI0At2, 1e-12));
    // No overflow far beyond where I0 itself leaves double range.
    CHECK(std::isfinite(log_bessel_i0(1000.0)));
    CHECK_THAT(log_bessel_i0(1000.0), Catch::Matchers::WithinRel(oracle::kLnI0At1000, 1e-12));
    CHECK_THROWS_AS(log_bessel_i0(-1e-12), std::invalid_argument);
}

TEST_CASE("log_bessel_i0 is monotone nondecreasing") {
    double prev = log_bessel_i0(0.0);
    for (double x = 1e-4; x < 2e3; x *= 1.37) {
        const double cur = log_bessel_i0(x);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("rayleigh_pdf values and normalization") {
    CHECK(rayleigh_pdf(0.0, 1.0) == 0.0);
    CHECK_THAT(rayleigh_pdf(1.0, 1.0), Catch::Matchers::WithinRel(oracle::kRayleighAt1, 1e-13));
    CHECK_THROWS_AS(rayleigh_pdf(-0.1, 1.0), std::invalid_argument);

    for (double sn : {0.7, 1.0, 2.0}) {
        const double mass = oracle::adaptive_simpson(
            [sn](double r) { return rayleigh_pdf(r, sn); }, 0.0, 12.0 * sn, 1e-12);
        CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-8));
    }
}

TEST_CASE("rice_pdf reduces to rayleigh at sigma_i = 0") {
    const AmplitudeModel degenerate(0.0, 1.3);
    for (double r = 0.0; r < 8.0; r += 0.17)
        CHECK_THAT(rice_pdf(r, degenerate),
                   Catch::Matchers::WithinAbs(rayleigh_pdf(r, 1.3), 1e-14));
}

TEST_CASE("rice_pdf normalization across INR levels") {
    for (double sigma : {0.5, 1.0, 2.0, 5.0}) {
        const AmplitudeModel model(sigma, 1.0);
        const double mass = oracle::adaptive_simpson(
            [&](double r) { return rice_pdf(r, model); }, 0.0, sigma + 14.0, 1e-12);
        CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-8));
    }
    CHECK_THROWS_AS(rice_pdf(-0.1, AmplitudeModel(1.0, 1.0)), std::invalid_argument);
}

TEST_CASE("rice_pdf mean agrees with a shifted-gaussian sampling oracle") {
    const AmplitudeModel model(1.5, 1.0);
    const double quad_mean = oracle::adaptive_simpson(
        [&](double r) { return r * rice_pdf(r, model); }, 0.0, 16.0, 1e-12);

    // Independent sampler: magnitude of a complex Gaussian with mean sigma_i.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const int samples = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double r = std::hypot(model.sigma_i + n(rng), n(rng));
        sum += r;
        sumsq += r * r;
    }
    const double mc_mean = sum / samples;
    const double mc_se = std::sqrt((sumsq / samples - mc_mean * mc_mean) / samples);
    CHECK_THAT(quad_mean, Catch::Matchers::WithinAbs(mc_mean, 3.0 * mc_se));
}

TEST_CASE("llr point values") {
    const AmplitudeModel model(1.0, 1.0);
    CHECK_THAT(llr(0.0, model), Catch::Matchers::WithinAbs(-1.0, 1e-14));  // -sigma^2
    CHECK_THAT(llr(1.0, model), Catch::Matchers::WithinRel(oracle::kLnI0At2 - 1.0, 1e-11));
    CHECK_THROWS_AS(llr(-1.0, model), std::invalid_argument);
    CHECK_THROWS_AS(llr(1.0, AmplitudeModel(0.0, 1.0)), std::invalid_argument);
}

TEST_CASE("llr ties the two densities together: exp(llr) f0 = f1") {
    for (double sigma : {0.4, 1.0, 2.5}) {
        const AmplitudeModel model(sigma, 1.0);
        for (double r = 0.05; r <= 10.0; r += 0.11) {
            const double lhs = std::exp(llr(r, model)) * rayleigh_pdf(r, 1.0);
            const double rhs = rice_pdf(r, model);
            CHECK_THAT(lhs, Catch::Matchers::WithinRel(rhs, 1e-9));
        }
    }
}

TEST_CASE("llr is monotone nondecreasing in r") {
    const AmplitudeModel model(1.7, 0.9);
    double prev = llr(0.0, model);
    for (double r = 0.01; r < 20.0; r += 0.05) {
        const double cur = llr(r, model);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("llr has negative H0 mean and positive H1 mean") {
    const AmplitudeModel model(1.0, 1.0);
    Rng rng(7);
    double sum0 = 0.0, sum1 = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        sum0 += llr(sample_amplitude(model, Hypothesis::H0, rng), model);
        sum1 += llr(sample_amplitude(model, Hypothesis::H1, rng), model);
    }
    CHECK(sum0 / n < -0.05);
    CHECK(sum1 / n > 0.05);
}

TEST_CASE("kl_information agrees with a Monte-Carlo oracle at 3 dB") {
    const double sigma2 = std::pow(10.0, 0.3);
    const double sigma = std::sqrt(sigma2);
    const double quad = kl_information(sigma);

    const AmplitudeModel model(sigma, 1.0);
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const std::uint64_t samples = 10000000;
    double sum = 0.0, sumsq = 0.0;
    for (std::uint64_t i = 0; i < samples; ++i) {
        const double r = std::hypot(sigma + n(rng), n(rng));
        const double l = llr(r, model);
        sum += l;
        sumsq += l * l;
    }
    const double mean = sum / samples;
    const double se = std::sqrt((sumsq / samples - mean * mean) / samples);
    CHECK_THAT(quad, Catch::Matchers::WithinAbs(mean, 3.0 * se));
}

TEST_CASE("kl_information is positive and increasing in sigma") {
    double prev = 0.0;
    for (double sigma = 0.1; sigma <= 5.0; sigma += 0.35) {
        const double info = kl_information(sigma);
        CHECK(info > 0.0);
        CHECK(info > prev);
        prev = info;
    }
}

TEST_CASE("1/I(sigma) lies inside the theorem bounds") {
    for (double s2 : {1.0, 1.26, 2.0, 3.16, 10.0}) {
        const double sigma = std::sqrt(s2);
        const double inv = 1.0 / kl_information(sigma);
        const auto bounds = theorem1_bounds(sigma);
        CHECK(inv >= bounds.lower);
        CHECK(inv <= bounds.upper);
    }
}

TEST_CASE("theorem1_bounds closed forms") {
    const auto b0 = theorem1_bounds(1.0);
    CHECK_THAT(b0.lower, Catch::Matchers::WithinRel(2.0, 1e-14));
    CHECK_THAT(b0.upper, Catch::Matchers::WithinRel(4.0, 1e-14));
    const auto b3 = theorem1_bounds(std::sqrt(std::pow(10.0, 0.3)));
    CHECK_THAT(b3.lower, Catch::Matchers::WithinRel(oracle::kBounds3dbLower, 1e-10));
    CHECK_THAT(b3.upper, Catch::Matchers::WithinRel(oracle::kBounds3dbUpper, 1e-10));
    const auto b5 = theorem1_bounds(std::sqrt(std::pow(10.0, 0.5)));
    CHECK_THAT(b5.lower, Catch::Matchers::WithinRel(oracle::kBounds5dbLower, 1e-10));
    CHECK_THAT(b5.upper, Catch::Matchers::WithinRel(oracle::kBounds5dbUpper, 1e-10));
    CHECK_THROWS_AS(theorem1_bounds(0.0), std::invalid_argument);
}

TEST_CASE("sample_amplitude second moments") {
    Rng rng(99);
    const int n = 200000;

    const AmplitudeModel h0_model(0.5, 1.0);
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = sample_amplitude(h0_model, Hypothesis::H0, rng);
        sumsq += r * r;
    }
    CHECK_THAT(sumsq / n, Catch::Matchers::WithinAbs(1.0, 0.02));  // E[r^2] = sigma_n^2

    const AmplitudeModel h1_model(2.0, 1.0);
    sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = sample_amplitude(h1_model, Hypothesis::H1, rng);
        sumsq += r * r;
    }
    CHECK_THAT(sumsq / n, Catch::Matchers::WithinAbs(5.0, 0.06));  // sigma_i^2 + sigma_n^2

    // H1 with sigma_i = 0 is distributionally H0.
    const AmplitudeModel zero(0.0, 1.0);
    std::vector<double> a(20000), b(20000);
    for (auto& v : a) v = sample_amplitude(zero, Hypothesis::H1, rng);
    for (auto& v : b) v = sample_amplitude(zero, Hypothesis::H0, rng);
    CHECK(oracle::ks_two_sample(a, b) < oracle::ks_two_sample_critical_01(a.size(), b.size()));
}

TEST_CASE("model validation") {
    CHECK_THROWS_AS(AmplitudeModel(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(AmplitudeModel(-1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(kl_information(0.0), std::invalid_argument);
}
