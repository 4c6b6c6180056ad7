#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdfmgan/panel.hpp"
#include "gdfmgan/spectral.hpp"

namespace gdfmgan {

/// Per-frequency Hermitian eigendecomposition of a cross spectrum, eigenvalues
/// descending. Columns [0, q) span the common part, [q, N) the idiosyncratic part.
///
/// Eigenvectors follow a fixed phase convention: the largest-magnitude entry of
/// each column is real and positive. Bins above M/2 are exact conjugates of
/// their mirror bins.
struct SpectralFactorization {
    Index q = 0;
    Index max_lag = 0;
    double dt = 0.0;
    std::vector<Eigen::VectorXd> eigenvalues;
    std::vector<Eigen::MatrixXcd> eigenvectors;
    /// Bins where two eigenvalues coincide to 1e-12 of the trace.
    Index tie_bins = 0;
    /// Largest |Im(v^* S v)| / trace seen while factorizing.
    double max_imag_eigenvalue = 0.0;

    Index bins() const { return static_cast<Index>(eigenvalues.size()); }
    Index sites() const { return eigenvalues.empty() ? 0 : eigenvalues.front().size(); }
};

/// Real tensor of shape (factors, sites, bins), factor-major then site then bin.
struct FilterTensor {
    Index factors = 0;
    Index sites = 0;
    Index bins = 0;
    std::vector<double> data;

    FilterTensor() = default;
    FilterTensor(Index q, Index n, Index m, double fill = 0.0)
        : factors(q), sites(n), bins(m), data(static_cast<std::size_t>(q * n * m), fill) {}

    std::size_t offset(Index k, Index n, Index m) const {
        return static_cast<std::size_t>((k * sites + n) * bins + m);
    }
    double& operator()(Index k, Index n, Index m) { return data[offset(k, n, m)]; }
    double operator()(Index k, Index n, Index m) const { return data[offset(k, n, m)]; }
    std::size_t size() const { return data.size(); }
};

/// Factor loading A(w) (N x q) and dynamic filter B(w) (q x N) per bin.
struct FilterBank {
    Index max_lag = 0;
    double dt = 0.0;
    std::vector<Eigen::MatrixXcd> loading;
    std::vector<Eigen::MatrixXcd> filter;

    Index factors() const { return filter.empty() ? 0 : filter.front().rows(); }
    Index sites() const { return filter.empty() ? 0 : filter.front().cols(); }
    Index bins() const { return static_cast<Index>(filter.size()); }
    Index half_bins() const { return bins() / 2 + 1; }

    /// |B| over all bins, or over the first `bins` bins when given.
    FilterTensor magnitude(Index bins = -1) const;
    /// angle(B) in (-pi, pi].
    FilterTensor phase(Index bins = -1) const;
};

SpectralFactorization dpca_split(const CrossSpectrum& spectrum, Index q);

/// Smallest q whose leading eigenvalues hold at least `share` of the spectral
/// energy summed over all bins.
Index select_q(const CrossSpectrum& spectrum, double share);

/// A = V_chi, B = V_chi^*.
FilterBank extract_filter(const SpectralFactorization& fact);

/// B rebuilt from magnitudes on the non-redundant bins and the phases of
/// `observed`; remaining bins are mirrored by conjugate symmetry. The loading
/// is kept from `observed`.
FilterBank apply_magnitudes(const FilterBank& observed, const FilterTensor& half_magnitudes);

struct CommonSpectrum {
    CrossSpectrum spectrum;
    /// Largest entry of |ABS - (ABS)^*| / 2 removed by symmetrization.
    double symmetrization_delta = 0.0;
};

/// S_chi(w) = A(w) B(w) S_X(w), Hermitian-symmetrized.
CommonSpectrum common_spectrum(const CrossSpectrum& spectrum, const FilterBank& bank);

/// V_xi Omega_xi V_xi^* per bin.
CrossSpectrum idiosyncratic_spectrum(const SpectralFactorization& fact);
/// V_chi Omega_chi V_chi^* per bin.
CrossSpectrum common_part(const SpectralFactorization& fact);

CrossSpectrum assemble_spectrum(const CrossSpectrum& common, const CrossSpectrum& idio);

/// X_hat = Phi_hat X P_q Lambda_q^-1 P_q^T in the T x N panel orientation,
/// where P, Lambda are the leading eigenpairs of the source panel's zero-lag
/// covariance. Eigenvalues below 1e-10 of the trace are dropped rather than
/// inverted; RankError if none survive.
Panel spca_reconstruct(const Eigen::MatrixXd& zero_lag, const Panel& source_panel, Index q);

/// Draws a synthetic filter bank given the bank observed on the source block.
class FilterSampler {
public:
    virtual ~FilterSampler() = default;
    virtual FilterBank sample(const FilterBank& observed, std::mt19937_64& rng) const = 0;
};

/// Returns the observed bank unchanged.
class IdentitySampler final : public FilterSampler {
public:
    FilterBank sample(const FilterBank& observed, std::mt19937_64& rng) const override;
};

/// Re-attaches the magnitudes of a uniformly drawn historical block to the
/// observed phases.
class BootstrapSampler final : public FilterSampler {
public:
    explicit BootstrapSampler(std::vector<FilterTensor> half_magnitudes);
    FilterBank sample(const FilterBank& observed, std::mt19937_64& rng) const override;

private:
    std::vector<FilterTensor> magnitudes_;
};

struct ScenarioBlock {
    Panel panel;
    Eigen::MatrixXd zero_lag;
    double symmetrization_delta = 0.0;
    double imag_residual = 0.0;
};

/// lag_covariance -> cpsd -> dpca_split -> sampled filter -> common spectrum +
/// data idiosyncratic spectrum -> inverse transform at lag 0 -> SPCA.
ScenarioBlock synthesize_scenario(const Panel& block, const FilterSampler& sampler, Index max_lag, Index q,
                                  std::uint64_t seed);

/// Observed banks of several blocks; A is recovered as B^*.
void write_filter_banks(const std::string& path, std::span<const FilterBank> banks);
std::vector<FilterBank> read_filter_banks(const std::string& path);

}  // namespace gdfmgan
