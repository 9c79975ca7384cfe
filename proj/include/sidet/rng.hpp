#pragma once

#include <complex>
#include <cstdint>
#include <random>

namespace sidet {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Counter-based seed derivation: every (master, cell, trial) triple maps to a
// fixed stream regardless of scheduling, which keeps parallel Monte-Carlo
// runs bit-reproducible.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t cell_id,
                                 std::uint64_t trial_index) {
    std::uint64_t s = detail::splitmix64(master_seed ^ 0x1905f9ee1cb1a02fULL);
    s = detail::splitmix64(s ^ detail::splitmix64(cell_id));
    s = detail::splitmix64(s ^ detail::splitmix64(trial_index));
    return s;
}

// Circularly-symmetric complex Gaussian CN(0, variance): the total variance is
// split evenly between real and imaginary parts.
inline std::complex<double> draw_complex_gaussian(Rng& rng, double variance) {
    std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline double draw_uniform_phase(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979323846);
    return u(rng);
}

} // namespace sidet
