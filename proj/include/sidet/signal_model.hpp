#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

#include <Eigen/Dense>

#include "sidet/rng.hpp"

namespace sidet {

inline constexpr std::uint64_t kNoChange = std::numeric_limits<std::uint64_t>::max();

// Uniform linear array. Angles are measured from broadside: theta = 0 is
// perpendicular to the array axis, so a source quoted as "90 degrees relative
// to the array axis" maps to theta = 0 here.
struct UlaGeometry {
    int num_elements = 4;
    double spacing_wavelengths = 0.5;

    UlaGeometry() = default;
    UlaGeometry(int m, double d_over_lambda = 0.5)
        : num_elements(m), spacing_wavelengths(d_over_lambda) {
        if (m < 2) throw std::invalid_argument("UlaGeometry: need at least 2 elements");
        if (!(d_over_lambda > 0.0)) throw std::invalid_argument("UlaGeometry: spacing must be positive");
    }
};

enum class PhaseModel { UniformRandom, Fixed };

struct InterferenceParams {
    double amplitude = 0.0;      // sigma_I, linear, same units as noise std
    double direction_rad = 0.0;  // theta in [-pi/2, pi/2] from broadside
    PhaseModel phase_model = PhaseModel::UniformRandom;
    double fixed_phase_rad = 0.0;

    InterferenceParams() = default;
    InterferenceParams(double sigma_i, double theta,
                       PhaseModel pm = PhaseModel::UniformRandom, double phase = 0.0)
        : amplitude(sigma_i), direction_rad(theta), phase_model(pm), fixed_phase_rad(phase) {
        if (!(sigma_i >= 0.0)) throw std::invalid_argument("InterferenceParams: amplitude must be >= 0");
        if (!(std::abs(theta) <= std::numbers::pi / 2.0))
            throw std::invalid_argument("InterferenceParams: |direction| must be <= pi/2");
    }
};

// Full generative description of one simulated stream.
struct ScenarioConfig {
    UlaGeometry geometry;
    double noise_std = 1.0;
    std::optional<InterferenceParams> interference;
    std::uint64_t change_point = kNoChange;  // kNoChange means H0 forever
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(noise_std > 0.0)) throw std::invalid_argument("ScenarioConfig: noise_std must be > 0");
        if (change_point < 1) throw std::invalid_argument("ScenarioConfig: change_point must be >= 1");
    }
};

// One idle-phase array observation.
struct Snapshot {
    Eigen::VectorXcd values;
    std::uint64_t index = 0;
};

// Unit-norm ULA steering vector, element m = exp(i 2 pi (d/lambda) m sin theta) / sqrt(M).
inline Eigen::VectorXcd steering_vector(const UlaGeometry& geometry, double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("steering_vector: theta must be finite");
    const int m = geometry.num_elements;
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    const double phase_step = 2.0 * std::numbers::pi * geometry.spacing_wavelengths * std::sin(theta);
    Eigen::VectorXcd a(m);
    for (int i = 0; i < m; ++i)
        a(i) = std::polar(scale, phase_step * static_cast<double>(i));
    return a;
}

// Draws the k-th snapshot of a scenario. Pre-change (k < nu) or with no
// interference configured this is pure noise; post-change it is
// sigma_I e^{i phi_k} a(theta) + noise.
inline Snapshot synthesize_snapshot(const ScenarioConfig& scenario, std::uint64_t k, Rng& rng) {
    if (k < 1) throw std::invalid_argument("synthesize_snapshot: indices are 1-based");
    const int m = scenario.geometry.num_elements;
    const double noise_var = scenario.noise_std * scenario.noise_std;

    Snapshot snap;
    snap.index = k;
    snap.values.resize(m);
    for (int i = 0; i < m; ++i) snap.values(i) = draw_complex_gaussian(rng, noise_var);

    if (scenario.interference && k >= scenario.change_point) {
        const auto& intf = *scenario.interference;
        const double phi = intf.phase_model == PhaseModel::UniformRandom
                               ? draw_uniform_phase(rng)
                               : intf.fixed_phase_rad;
        snap.values += std::polar(intf.amplitude, phi) *
                       steering_vector(scenario.geometry, intf.direction_rad);
    }
    return snap;
}

// Matched-filter projection z = steer^H y.
inline std::complex<double> project(const Snapshot& snapshot, const Eigen::VectorXcd& steer) {
    if (snapshot.values.size() != steer.size())
        throw std::invalid_argument("project: dimension mismatch");
    return steer.dot(snapshot.values);  // Eigen dot conjugates the first argument
}

inline double amplitude(std::complex<double> z) { return std::abs(z); }

} // namespace sidet
