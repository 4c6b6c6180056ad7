#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gdfmgan/config.hpp"
#include "gdfmgan/panel.hpp"
#include "gdfmgan/spectral.hpp"

namespace gdfmgan {

/// Lagged AR(1) factor process with known spectra:
///   x_t = L f_{t - lag} + xi_t + diurnal(t),  f_t = rho f_{t-1} + e_t.
/// Each site n sees every factor delayed by lags[n] samples.
struct OracleSpec {
    Index sites = 4;
    Index steps = 28800;
    std::int64_t dt = 300;
    std::int64_t start = 1483228800;  // 2017-01-01T00:00:00
    Index factors = 1;
    double rho = 0.995;
    double innovation_sd = 1.0;
    Eigen::MatrixXd loadings;       // sites x factors
    std::vector<Index> lags;        // per site, samples
    double noise_sd = 0.5;
    double diurnal_amplitude = 3.0;
    Eigen::VectorXd capacities;     // MW
    std::uint64_t seed = 1;

    /// Throws ConfigError on a violated invariant.
    void validate() const;
    /// Stationary variance of each factor.
    double factor_variance() const { return innovation_sd * innovation_sd / (1.0 - rho * rho); }
};

/// N = 4, one factor, loadings (1.0, 0.9, 0.8, 0.7), lags (0, 1, 1, 2),
/// 100 MW per site, 100 days at 5 minutes.
OracleSpec default_oracle_spec();

/// Keys `oracle.*` override the defaults; `seed` is used when `oracle.seed`
/// is absent.
OracleSpec oracle_spec_from(const Config& cfg);

struct OracleProcess {
    Eigen::MatrixXd factors;     // T x q, aligned to the panel (lag 0)
    Eigen::MatrixXd stochastic;  // T x N, L f_{t-lag} + xi_t
    Eigen::MatrixXd diurnal;     // T x N
};

OracleProcess simulate(const OracleSpec& spec);

/// Stochastic plus diurnal part, shifted and scaled into [0, 1] with the
/// panel-wide range, then multiplied by the site capacities.
Panel generate_panel(const OracleSpec& spec);

/// Closed-form spectrum of the stochastic part on the grid 2 pi m / (2K + 1):
/// S(w) = L(w) diag(sigma_e^2 / |1 - rho e^{-jw}|^2) L(w)^* + sigma_xi^2 I,
/// L(w)_{n,k} = L_{n,k} e^{-j w lags[n]}.
CrossSpectrum analytic_cpsd(const OracleSpec& spec, Index max_lag);

}  // namespace gdfmgan
