#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gdfmgan/panel.hpp"
#include "gdfmgan/spectral.hpp"

namespace gdfmgan {

/// d_t = x_t - x_{t-k}, t = k..T-1.
std::vector<double> ramp_rates(std::span<const double> series, Index k);

struct LaplaceFit {
    double mu = 0.0;  // median
    double b = 0.0;   // mean absolute deviation about the median
};

/// Maximum-likelihood Laplace fit. DegenerateError when all samples coincide.
LaplaceFit fit_laplace(std::span<const double> samples);

struct Histogram {
    std::vector<double> edges;  // bins + 1
    std::vector<double> mass;   // sums to 1 (all zero for an empty sample)
};

/// Uniform bins on [lo, hi]; values outside are dropped, hi falls in the last bin.
Histogram histogram(std::span<const double> samples, double lo, double hi, Index bins);
/// Both histograms on the pooled min/max of the two samples.
std::pair<Histogram, Histogram> paired_histograms(std::span<const double> a, std::span<const double> b, Index bins);

/// sum P ln(P/Q) after adding `eps` to every bin and renormalizing.
/// BinError when the edges differ.
double kl_divergence(const Histogram& p, const Histogram& q, double eps = 1e-9);

struct Moments {
    double mean = 0.0;
    double sd = 0.0;
    double skewness = 0.0;
    double kurtosis = 0.0;  // not excess-adjusted
};
Moments moments(std::span<const double> samples);

struct RampStats {
    Index interval = 0;
    LaplaceFit laplace;
    Moments moments;
    Histogram hist;
};

struct Band {
    double period_hi = 0.0;  // seconds
    double period_lo = 0.0;
    std::string label;
};

/// 7D-1D, 1D-6h, 6h-1h, 1h-10m.
std::vector<Band> default_bands();
/// "10min", "1h", "1D", ...
std::string duration_label(double seconds);

struct BandEnergy {
    Band band;
    double energy = 0.0;  // integral of the PSD over 1/period_hi < f <= 1/period_lo
    double db = 0.0;      // 10 log10(energy); -inf when empty
    double percent = 0.0; // share of the summed energy of all bands
    bool empty = false;
};

/// ConfigError when a band reaches beyond the Nyquist frequency.
std::vector<BandEnergy> psd_band_energy(const PsdEstimate& psd, const std::vector<Band>& bands);

/// Zero-lag covariance (population, de-meaned) of a T x N matrix.
Eigen::MatrixXd zero_lag_covariance(const Eigen::MatrixXd& values);

struct CovarianceComparison {
    Eigen::MatrixXd actual;
    Eigen::MatrixXd synthetic;
    double frobenius_rel_err = 0.0;
};

/// Covariances of the capacity-normalized panels.
CovarianceComparison covariance_compare(const Panel& actual, const Panel& synth);

/// Delivered energy over the energy of full-capacity operation for the span.
double capacity_factor(std::span<const double> series, double capacity, double dt);

struct ReportOptions {
    std::vector<Index> ramp_intervals{2, 6, 12};
    Index bins = 101;
    std::vector<Band> bands = default_bands();
    Index segment_len = 0;  // 0: default_segment_len
    double overlap = 0.5;
    std::string window = "hann";
};

struct RampComparison {
    Index interval = 0;
    std::string label;
    RampStats actual;
    RampStats synthetic;
    double kl = 0.0;
};

struct BandComparison {
    BandEnergy actual;
    BandEnergy synthetic;
    /// |E_syn - E_act| / (total actual energy of all bands), in percent.
    double diff_percent = 0.0;
    /// |E_syn - E_act| / E_act, in percent.
    double relative_diff_percent = 0.0;
};

/// All statistics use capacity-normalized values. Synthetic statistics pool
/// every scenario; ramps and marginals pool every site.
struct MetricsReport {
    Index scenarios = 0;
    double dt = 0.0;
    std::vector<std::string> site_ids;
    std::vector<RampComparison> ramps;
    PsdEstimate actual_psd;     // mean over sites
    PsdEstimate synthetic_psd;  // mean over sites and scenarios
    std::vector<BandComparison> bands;
    CovarianceComparison covariance;  // synthetic = mean scenario covariance
    /// Mean over scenarios of each scenario's Frobenius relative error.
    double scenario_covariance_err = 0.0;
    Eigen::VectorXd cf_actual;
    Eigen::VectorXd cf_synthetic;
    double cf_aggregate_actual = 0.0;
    double cf_aggregate_synthetic = 0.0;
    double cf_diff_percent = 0.0;
    Histogram marginal_actual;
    Histogram marginal_synthetic;
    double marginal_kl = 0.0;
    double mean_actual = 0.0;
    double mean_synthetic = 0.0;
    double sd_actual = 0.0;
    double sd_synthetic = 0.0;
    double mean_diff_percent = 0.0;
    double sd_diff_percent = 0.0;

    bool all_finite() const;
};

MetricsReport build_report(const Panel& actual, std::span<const Panel> scenarios, const ReportOptions& options = {});

/// report.json plus CSV sidecars in `dir`.
void write_report(const std::string& dir, const MetricsReport& report);

}  // namespace gdfmgan
