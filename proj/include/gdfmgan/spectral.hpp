#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdfmgan/panel.hpp"

namespace gdfmgan {

/// Lag covariances Phi(k), k = -K..K, stored at index k + K.
struct LagCovSeq {
    Index max_lag = 0;
    double dt = 0.0;
    std::vector<Eigen::MatrixXd> matrices;
    /// Largest imaginary part discarded when this sequence came from inverse_cpsd.
    double imag_residual = 0.0;

    Index sites() const { return matrices.empty() ? 0 : matrices.front().rows(); }
    const Eigen::MatrixXd& at(Index k) const { return matrices[static_cast<std::size_t>(k + max_lag)]; }
    Eigen::MatrixXd& at(Index k) { return matrices[static_cast<std::size_t>(k + max_lag)]; }
};

/// Cross power spectral density on the grid omega_m = 2 pi m / M, M = 2K + 1.
struct CrossSpectrum {
    Index max_lag = 0;
    double dt = 0.0;
    std::vector<Eigen::MatrixXcd> matrices;

    Index bins() const { return static_cast<Index>(matrices.size()); }
    Index sites() const { return matrices.empty() ? 0 : matrices.front().rows(); }
    /// Number of non-redundant bins, floor(M/2) + 1.
    Index half_bins() const { return bins() / 2 + 1; }
    double omega(Index m) const;
};

struct PsdEstimate {
    Eigen::VectorXd frequencies;  // Hz
    Eigen::VectorXd power;        // one-sided density, units^2 / Hz
    Index segment_len = 0;
    Index segments = 0;
    double overlap = 0.0;
    std::string window;

    double resolution() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }
};

/// floor(sqrt(T)) capped at 720.
Index default_max_lag(Index steps);

/// Biased, de-meaned lag covariance with a Bartlett taper 1 - |k|/(K+1).
/// Requires K < T/4 (LagError otherwise).
LagCovSeq lag_covariance(const Eigen::MatrixXd& values, Index max_lag, double dt, bool taper = true);
/// Panel overload; the panel must be normalized.
LagCovSeq lag_covariance(const Panel& panel, Index max_lag);

CrossSpectrum cpsd(const LagCovSeq& lagcov);

/// Real part of the inverse transform. Throws SymmetryError when the discarded
/// imaginary part exceeds 1e-8 of the largest real entry.
LagCovSeq inverse_cpsd(const CrossSpectrum& spectrum);

/// Largest |S - S^*| entry over all bins.
double hermitian_defect(const CrossSpectrum& spectrum);
/// Largest |S(w_{M-m}) - conj(S(w_m))| entry over all bins.
double conjugate_symmetry_defect(const CrossSpectrum& spectrum);
void hermitian_symmetrize(CrossSpectrum& spectrum);

/// 2^floor(log2(T/8)), at least 1.
Index default_segment_len(Index steps);

/// Welch estimate of a single series sampled every `dt` seconds. Windows:
/// "hann" (periodic), "hamming", "rect". Segments are mean-removed.
PsdEstimate welch_psd(const Eigen::VectorXd& series, double dt, Index segment_len, double overlap = 0.5,
                      const std::string& window = "hann");

void write_spectrum(const std::string& path, const CrossSpectrum& spectrum);
CrossSpectrum read_spectrum(const std::string& path);
/// CSV `bin,omega,<site>...` with the real diagonal of every bin.
void write_spectrum_diagonals(const std::string& path, const CrossSpectrum& spectrum,
                              const std::vector<std::string>& site_ids);

}  // namespace gdfmgan
