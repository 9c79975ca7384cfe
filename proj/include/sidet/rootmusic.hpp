#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sidet/errors.hpp"
#include "sidet/signal_model.hpp"

namespace sidet {

struct SampleCovariance {
    Eigen::MatrixXcd matrix;
    std::size_t num_snapshots = 0;
};

struct NoiseSubspace {
    Eigen::MatrixXcd basis;       // M x (M-1), orthonormal columns
    Eigen::VectorXd eigenvalues;  // the M-1 smallest, ascending
};

struct DoaEstimate {
    double theta_rad = 0.0;
    double root_modulus = 1.0;
    std::uint64_t window_begin = 0;
    std::uint64_t window_end = 0;
};

// R = (1/N) sum y_i y_i^H, Hermitian-symmetrized.
inline SampleCovariance sample_covariance(std::span<const Snapshot> snapshots) {
    if (snapshots.empty()) throw std::invalid_argument("sample_covariance: empty input");
    const auto m = snapshots.front().values.size();
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
    for (const auto& snap : snapshots) {
        if (snap.values.size() != m)
            throw std::invalid_argument("sample_covariance: inconsistent snapshot length");
        r.noalias() += snap.values * snap.values.adjoint();
    }
    r /= static_cast<double>(snapshots.size());
    r = ((r + r.adjoint()) / 2.0).eval();
    return {std::move(r), snapshots.size()};
}

// Eigenvectors of the M-1 smallest eigenvalues, ascending. Each column's
// phase is fixed by rotating its largest-magnitude component real-positive so
// degenerate spectra still produce a deterministic basis.
inline NoiseSubspace noise_subspace(const SampleCovariance& cov, int num_sources = 1) {
    if (num_sources != 1)
        throw std::invalid_argument("noise_subspace: only the single-source model is supported");
    const auto m = cov.matrix.rows();
    if (m < 2) throw std::invalid_argument("noise_subspace: need M >= 2");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(cov.matrix);
    if (solver.info() != Eigen::Success)
        throw numerical_error("noise_subspace: eigendecomposition failed");

    NoiseSubspace out;
    out.eigenvalues = solver.eigenvalues().head(m - 1);  // ascending in Eigen
    out.basis = solver.eigenvectors().leftCols(m - 1);
    for (Eigen::Index c = 0; c < out.basis.cols(); ++c) {
        Eigen::Index imax = 0;
        out.basis.col(c).cwiseAbs().maxCoeff(&imax);
        const std::complex<double> pivot = out.basis(imax, c);
        if (std::abs(pivot) > 0.0) out.basis.col(c) *= std::conj(pivot) / std::abs(pivot);
    }
    return out;
}

// Coefficients c_l, l in [-(M-1), M-1], stored at index l + M - 1:
// c_l = sum_{i,j} [E_n]_{i,j} conj([E_n]_{i+|l|,j}), c_{-l} = conj(c_l).
// Equivalently c_l sums the |l|-th superdiagonal of E_n E_n^H, so c_0 equals
// the squared Frobenius norm M-1.
inline std::vector<std::complex<double>> rootmusic_polynomial(const NoiseSubspace& subspace) {
    const auto m = subspace.basis.rows();
    std::vector<std::complex<double>> c(2 * m - 1);
    for (Eigen::Index l = 0; l < m; ++l) {
        std::complex<double> sum = 0.0;
        for (Eigen::Index i = 0; i + l < m; ++i)
            for (Eigen::Index j = 0; j < subspace.basis.cols(); ++j)
                sum += subspace.basis(i, j) * std::conj(subspace.basis(i + l, j));
        c[m - 1 + l] = sum;
        c[m - 1 - l] = std::conj(sum);
    }
    return c;
}

// Roots of sum_n coeffs[n] z^n via companion-matrix eigenvalues. Zero leading
// coefficients are trimmed; zero trailing coefficients contribute roots at 0.
inline std::vector<std::complex<double>> polynomial_roots(
    std::span<const std::complex<double>> coeffs) {
    double max_mag = 0.0;
    for (const auto& c : coeffs) max_mag = std::max(max_mag, std::abs(c));
    if (max_mag == 0.0) throw std::invalid_argument("polynomial_roots: all coefficients are zero");
    const double tiny = max_mag * 1e-14;

    std::size_t hi = coeffs.size();
    while (hi > 0 && std::abs(coeffs[hi - 1]) <= tiny) --hi;
    std::size_t lo = 0;
    while (lo < hi && std::abs(coeffs[lo]) <= tiny) ++lo;

    std::vector<std::complex<double>> roots(lo, 0.0);  // factored-out powers of z
    const std::size_t degree = hi - 1 - lo;
    if (degree == 0) return roots;

    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(degree, degree);
    const std::complex<double> lead = coeffs[hi - 1];
    for (std::size_t i = 0; i < degree; ++i) companion(i, degree - 1) = -coeffs[lo + i] / lead;
    for (std::size_t i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw numerical_error("polynomial_roots: companion eigensolver failed");
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i)
        roots.push_back(solver.eigenvalues()(i));
    return roots;
}

struct DoaOptions {
    // Adds eps*I with eps = 1e-10 trace(R)/M before the eigendecomposition.
    bool diagonal_loading = false;
};

// Root-MUSIC from an already-formed covariance: noise subspace, polynomial,
// rooting, then the root of maximal modulus within the closed unit disc
// (tolerance band 1e-9 outside). Near-ties in modulus are broken by
// beamformer power a(theta)^H R a(theta). A zero-modulus root is admitted
// only as a last resort (identically-zero windows), mapping to theta = 0.
inline DoaEstimate estimate_doa_from_covariance(SampleCovariance cov, const UlaGeometry& geometry,
                                                const DoaOptions& options = {}) {
    if (cov.matrix.rows() != geometry.num_elements)
        throw std::invalid_argument("estimate_doa: covariance does not match geometry");
    if (options.diagonal_loading) {
        const double eps = 1e-10 * cov.matrix.real().trace() / geometry.num_elements;
        cov.matrix += eps * Eigen::MatrixXcd::Identity(cov.matrix.rows(), cov.matrix.cols());
    }

    const auto coeffs = rootmusic_polynomial(noise_subspace(cov));
    // The null spectrum is P(z) = sum_l c_l z^l; the stored vector is already
    // the ascending coefficient list of z^{M-1} P(z), whose extra roots at 0
    // are discarded below.
    const auto roots = polynomial_roots(coeffs);

    constexpr double kDiscTol = 1e-9;
    const auto angle_of = [&](const std::complex<double>& z) {
        const double s = std::arg(z) / (2.0 * std::numbers::pi * geometry.spacing_wavelengths);
        return std::asin(std::clamp(s, -1.0, 1.0));
    };
    const auto beam_power = [&](const std::complex<double>& z) {
        const Eigen::VectorXcd a = steering_vector(geometry, angle_of(z));
        return std::real(a.dot(cov.matrix * a));
    };

    const std::complex<double>* best = nullptr;
    bool have_zero_root = false;
    for (const auto& z : roots) {
        const double mod = std::abs(z);
        if (mod > 1.0 + kDiscTol) continue;
        if (mod == 0.0) {
            have_zero_root = true;
            continue;
        }
        if (!best) {
            best = &z;
            continue;
        }
        const double diff = mod - std::abs(*best);
        if (diff > kDiscTol || (diff > -kDiscTol && beam_power(z) > beam_power(*best))) best = &z;
    }

    DoaEstimate est;
    if (best) {
        est.theta_rad = angle_of(*best);
        est.root_modulus = std::min(std::abs(*best), 1.0);
    } else if (have_zero_root) {
        est.theta_rad = 0.0;
        est.root_modulus = 0.0;
    } else {
        std::ostringstream msg;
        msg << "estimate_doa: no root inside the unit disc; moduli:";
        for (const auto& z : roots) msg << ' ' << std::abs(z);
        throw numerical_error(msg.str());
    }
    return est;
}

// Full chain from a snapshot window.
inline DoaEstimate estimate_doa(std::span<const Snapshot> snapshots, const UlaGeometry& geometry,
                                const DoaOptions& options = {}) {
    DoaEstimate est = estimate_doa_from_covariance(sample_covariance(snapshots), geometry, options);
    est.window_begin = snapshots.front().index;
    est.window_end = snapshots.back().index;
    return est;
}

} // namespace sidet
