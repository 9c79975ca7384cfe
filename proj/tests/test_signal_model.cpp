#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "sidet/amplitude_stats.hpp"
#include "sidet/signal_model.hpp"
#include "oracle.hpp"

using namespace sidet;

TEST_CASE("steering vector at broadside and endfire") {
    const UlaGeometry geom(4, 0.5);
    const auto broadside = steering_vector(geom, 0.0);
    for (int i = 0; i < 4; ++i) {
        CHECK_THAT(broadside(i).real(), Catch::Matchers::WithinAbs(0.5, 1e-15));
        CHECK_THAT(broadside(i).imag(), Catch::Matchers::WithinAbs(0.0, 1e-15));
    }
    const auto endfire = steering_vector(geom, std::numbers::pi / 2.0);
    for (int i = 0; i < 4; ++i) {
        CHECK_THAT(endfire(i).real(), Catch::Matchers::WithinAbs(i % 2 == 0 ? 0.5 : -0.5, 1e-12));
        CHECK_THAT(endfire(i).imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("steering vector matches the high-precision reference at M=8, theta=0.3") {
    const auto a = steering_vector(UlaGeometry(8, 0.5), 0.3);
    for (int i = 0; i < 8; ++i) {
        CHECK_THAT(a(i).real(),
                   Catch::Matchers::WithinAbs(oracle::kSteeringM8Theta03[i].real(), 1e-12));
        CHECK_THAT(a(i).imag(),
                   Catch::Matchers::WithinAbs(oracle::kSteeringM8Theta03[i].imag(), 1e-12));
    }
}

TEST_CASE("steering vector has unit norm for all geometries and angles") {
    for (int m : {2, 4, 8, 16})
        for (double theta = -1.5; theta <= 1.5; theta += 0.083) {
            const auto a = steering_vector(UlaGeometry(m, 0.5), theta);
            CHECK_THAT(a.norm(), Catch::Matchers::WithinAbs(1.0, 1e-12));
        }
    CHECK_THROWS_AS(steering_vector(UlaGeometry(4), std::nan("")), std::invalid_argument);
    CHECK_THROWS_AS(UlaGeometry(1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(UlaGeometry(4, 0.0), std::invalid_argument);
}

TEST_CASE("projection identities") {
    const UlaGeometry geom(4, 0.5);
    const auto a = steering_vector(geom, 0.42);
    Snapshot snap{a, 1};
    const auto z = project(snap, a);
    CHECK_THAT(z.real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(z.imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));

    // Orthogonal input projects to zero.
    Eigen::VectorXcd y(4);
    y << 1.0, -0.3, 0.8, 0.1;
    y -= a.dot(y) * a;  // explicit orthogonalization (a has unit norm)
    snap.values = y;
    CHECK(std::abs(project(snap, a)) < 1e-12);

    Snapshot wrong{Eigen::VectorXcd::Zero(3), 1};
    CHECK_THROWS_AS(project(wrong, a), std::invalid_argument);
}

TEST_CASE("amplitude basics") {
    CHECK(amplitude({3.0, 4.0}) == 5.0);
    CHECK(amplitude({0.0, 0.0}) == 0.0);
    for (double phi = 0.0; phi < 6.28; phi += 0.7)
        CHECK_THAT(amplitude(std::polar(1.0, phi)), Catch::Matchers::WithinAbs(1.0, 1e-15));
}

namespace {

ScenarioConfig make_scenario(double sigma_i, std::uint64_t change_point,
                             double theta = 0.3, PhaseModel pm = PhaseModel::UniformRandom) {
    ScenarioConfig sc;
    sc.geometry = UlaGeometry(4, 0.5);
    sc.noise_std = 1.0;
    if (sigma_i >= 0.0) sc.interference = InterferenceParams(sigma_i, theta, pm);
    sc.change_point = change_point;
    return sc;
}

} // namespace

TEST_CASE("H0 snapshots project to noise power sigma_n^2") {
    const auto sc = make_scenario(-1.0, kNoChange);  // no interference at all
    const auto steer = steering_vector(sc.geometry, 0.3);
    Rng rng(11);
    const int n = 100000;
    double sumsq = 0.0;
    for (int k = 1; k <= n; ++k)
        sumsq += std::norm(project(synthesize_snapshot(sc, k, rng), steer));
    // E|z|^2 = sigma_n^2 = 1; |z|^2 is Exp(1) so se = 1/sqrt(n)
    CHECK_THAT(sumsq / n, Catch::Matchers::WithinAbs(1.0, 3.0 / std::sqrt(n)));
}

TEST_CASE("interference from nu=1 raises projected power to sigma_i^2 + sigma_n^2") {
    const auto sc = make_scenario(1.0, 1);
    const auto steer = steering_vector(sc.geometry, 0.3);
    Rng rng(12);
    const int n = 100000;
    double sumsq = 0.0;
    for (int k = 1; k <= n; ++k)
        sumsq += std::norm(project(synthesize_snapshot(sc, k, rng), steer));
    CHECK_THAT(sumsq / n, Catch::Matchers::WithinAbs(2.0, 3.0 * 2.0 / std::sqrt(n)));
}

TEST_CASE("zero-amplitude interference is indistinguishable from H0") {
    const auto off = make_scenario(-1.0, kNoChange);
    const auto zero = make_scenario(0.0, 1);
    const auto steer = steering_vector(off.geometry, 0.3);
    Rng rng_a(21), rng_b(22);
    std::vector<double> a, b;
    for (int k = 1; k <= 20000; ++k) {
        a.push_back(amplitude(project(synthesize_snapshot(off, k, rng_a), steer)));
        b.push_back(amplitude(project(synthesize_snapshot(zero, k, rng_b), steer)));
    }
    CHECK(oracle::ks_two_sample(a, b) < oracle::ks_two_sample_critical_01(a.size(), b.size()));
}

TEST_CASE("fixed-phase interference has the expected projection mean") {
    auto sc = make_scenario(1.5, 1, 0.3, PhaseModel::Fixed);
    sc.interference->fixed_phase_rad = 0.77;
    const auto steer = steering_vector(sc.geometry, 0.3);
    Rng rng(31);
    std::complex<double> sum = 0.0;
    const int n = 40000;
    for (int k = 1; k <= n; ++k) sum += project(synthesize_snapshot(sc, k, rng), steer);
    const auto expected = std::polar(1.5, 0.77);
    CHECK_THAT(std::abs(sum / static_cast<double>(n) - expected),
               Catch::Matchers::WithinAbs(0.0, 4.0 / std::sqrt(n)));
}

TEST_CASE("H0 amplitudes pass a KS test against the Rayleigh law") {
    const auto sc = make_scenario(-1.0, kNoChange);
    const auto steer = steering_vector(sc.geometry, -0.51);
    Rng rng(41);
    std::vector<double> r(100000);
    for (std::size_t k = 0; k < r.size(); ++k)
        r[k] = amplitude(project(synthesize_snapshot(sc, k + 1, rng), steer));
    const auto rayleigh_cdf = [](double x) { return -std::expm1(-x * x); };
    CHECK(oracle::ks_statistic(r, rayleigh_cdf) < oracle::ks_critical_01(r.size()));
}

TEST_CASE("H1 amplitudes pass a KS test against the Rice law") {
    const double sigma_i = 1.3;
    const auto sc = make_scenario(sigma_i, 1, 0.2);
    const auto steer = steering_vector(sc.geometry, 0.2);
    Rng rng(42);
    std::vector<double> r(100000);
    for (std::size_t k = 0; k < r.size(); ++k)
        r[k] = amplitude(project(synthesize_snapshot(sc, k + 1, rng), steer));

    // Independent Rice CDF: cumulative trapezoid of the density written out
    // directly, using the standard-library Bessel function.
    const double r_max = sigma_i + 8.0;
    const int grid = 16000;
    std::vector<double> cdf(grid + 1, 0.0);
    const auto pdf = [&](double x) {
        return 2.0 * x * std::exp(-(x * x + sigma_i * sigma_i)) * std::cyl_bessel_i(0, 2.0 * sigma_i * x);
    };
    const double dx = r_max / grid;
    for (int i = 1; i <= grid; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * dx * (pdf((i - 1) * dx) + pdf(i * dx));
    const auto rice_cdf = [&](double x) {
        if (x <= 0.0) return 0.0;
        if (x >= r_max) return 1.0;
        const double pos = x / dx;
        const int i = static_cast<int>(pos);
        return cdf[i] + (pos - i) * (cdf[i + 1] - cdf[i]);
    };
    CHECK(oracle::ks_statistic(r, rice_cdf) < oracle::ks_critical_01(r.size()));
}

TEST_CASE("under H0 the projected amplitude law does not depend on the steering direction") {
    const auto sc = make_scenario(-1.0, kNoChange);
    const auto steer_a = steering_vector(sc.geometry, -0.7);
    const auto steer_b = steering_vector(sc.geometry, 0.9);
    Rng rng_a(51), rng_b(52);
    std::vector<double> a, b;
    for (int k = 1; k <= 50000; ++k) {
        a.push_back(amplitude(project(synthesize_snapshot(sc, k, rng_a), steer_a)));
        b.push_back(amplitude(project(synthesize_snapshot(sc, k, rng_b), steer_b)));
    }
    CHECK(oracle::ks_two_sample(a, b) < oracle::ks_two_sample_critical_01(a.size(), b.size()));
}

TEST_CASE("scenario validation") {
    ScenarioConfig sc;
    sc.noise_std = 0.0;
    CHECK_THROWS_AS(sc.validate(), std::invalid_argument);
    CHECK_THROWS_AS(InterferenceParams(-0.1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(InterferenceParams(1.0, 2.0), std::invalid_argument);  // beyond pi/2
    Rng rng(1);
    CHECK_THROWS_AS(synthesize_snapshot(make_scenario(1.0, 1), 0, rng), std::invalid_argument);
}
