#include "gdfmgan/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "gdfmgan/errors.hpp"

namespace gdfmgan {

void OracleSpec::validate() const {
    if (sites < 1 || steps < 2) throw ConfigError("oracle needs at least one site and two steps");
    if (dt <= 0) throw ConfigError("oracle dt must be positive");
    if (factors < 0) throw ConfigError("oracle factor count must be >= 0");
    if (!(std::abs(rho) < 1.0)) throw ConfigError("oracle rho must lie in (-1, 1)");
    if (!(innovation_sd >= 0.0) || !(noise_sd >= 0.0)) throw ConfigError("oracle standard deviations must be >= 0");
    if (loadings.rows() != sites || loadings.cols() != factors)
        throw ConfigError("oracle loadings must be sites x factors");
    if (static_cast<Index>(lags.size()) != sites) throw ConfigError("oracle needs one lag per site");
    for (Index l : lags)
        if (l < 0 || 10 * l >= steps) throw ConfigError("oracle lags must lie in [0, T/10)");
    if (capacities.size() != sites || (capacities.array() <= 0.0).any())
        throw ConfigError("oracle capacities must be positive, one per site");
}

OracleSpec default_oracle_spec() {
    OracleSpec s;
    s.loadings.resize(4, 1);
    s.loadings << 1.0, 0.9, 0.8, 0.7;
    s.lags = {0, 1, 1, 2};
    s.capacities = Eigen::VectorXd::Constant(4, 100.0);
    return s;
}

OracleSpec oracle_spec_from(const Config& cfg) {
    OracleSpec s = default_oracle_spec();
    s.sites = cfg.get_int("oracle.sites", s.sites);
    s.steps = cfg.get_int("oracle.steps", s.steps);
    s.dt = cfg.get_int("oracle.dt", s.dt);
    if (cfg.has("oracle.start")) s.start = parse_timestamp(cfg.get("oracle.start", ""));
    s.factors = cfg.get_int("oracle.factors", s.factors);
    s.rho = cfg.get_double("oracle.rho", s.rho);
    s.innovation_sd = cfg.get_double("oracle.innovation_sd", s.innovation_sd);
    s.noise_sd = cfg.get_double("oracle.noise_sd", s.noise_sd);
    s.diurnal_amplitude = cfg.get_double("oracle.diurnal_amplitude", s.diurnal_amplitude);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("oracle.seed", cfg.get_int("seed", static_cast<std::int64_t>(s.seed))));

    if (cfg.has("oracle.loadings") || s.sites != 4 || s.factors != 1) {
        const auto flat = cfg.get_doubles("oracle.loadings", {});
        if (flat.empty()) {
            // Decaying loadings on every factor.
            s.loadings.resize(s.sites, s.factors);
            for (Index n = 0; n < s.sites; ++n)
                for (Index k = 0; k < s.factors; ++k)
                    s.loadings(n, k) = 1.0 - 0.1 * static_cast<double>((n + k) % 5);
        } else {
            if (static_cast<Index>(flat.size()) != s.sites * s.factors)
                throw ConfigError("oracle.loadings needs sites*factors values (row-major)");
            s.loadings.resize(s.sites, s.factors);
            for (Index n = 0; n < s.sites; ++n)
                for (Index k = 0; k < s.factors; ++k) s.loadings(n, k) = flat[static_cast<std::size_t>(n * s.factors + k)];
        }
    }
    const auto lags = cfg.get_ints("oracle.lags", {});
    if (!lags.empty())
        s.lags.assign(lags.begin(), lags.end());
    else if (static_cast<Index>(s.lags.size()) != s.sites)
        s.lags.assign(static_cast<std::size_t>(s.sites), 0);
    const auto caps = cfg.get_doubles("oracle.capacity", {});
    if (caps.size() == 1)
        s.capacities = Eigen::VectorXd::Constant(s.sites, caps[0]);
    else if (!caps.empty())
        s.capacities = Eigen::Map<const Eigen::VectorXd>(caps.data(), static_cast<Index>(caps.size()));
    else if (s.capacities.size() != s.sites)
        s.capacities = Eigen::VectorXd::Constant(s.sites, 100.0);
    s.validate();
    return s;
}

OracleProcess simulate(const OracleSpec& spec) {
    spec.validate();
    const Index T = spec.steps, N = spec.sites, q = spec.factors;
    const Index pad = spec.lags.empty() ? 0 : *std::max_element(spec.lags.begin(), spec.lags.end());
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Factor path over T + pad samples, started in the stationary law.
    Eigen::MatrixXd f(T + pad, q);
    for (Index k = 0; k < q; ++k) {
        f(0, k) = std::sqrt(spec.factor_variance()) * normal(rng);
        for (Index t = 1; t < T + pad; ++t) f(t, k) = spec.rho * f(t - 1, k) + spec.innovation_sd * normal(rng);
    }

    OracleProcess p;
    p.factors = f.bottomRows(T);
    p.stochastic.resize(T, N);
    for (Index t = 0; t < T; ++t)
        for (Index n = 0; n < N; ++n) {
            double v = 0.0;
            for (Index k = 0; k < q; ++k) v += spec.loadings(n, k) * f(t + pad - spec.lags[static_cast<std::size_t>(n)], k);
            p.stochastic(t, n) = v;
        }
    for (Index t = 0; t < T; ++t)
        for (Index n = 0; n < N; ++n) p.stochastic(t, n) += spec.noise_sd * normal(rng);

    p.diurnal.resize(T, N);
    for (Index t = 0; t < T; ++t) {
        const std::int64_t ts = spec.start + t * spec.dt;
        const double tod = static_cast<double>(((ts % 86400) + 86400) % 86400) / 86400.0;
        p.diurnal.row(t).setConstant(spec.diurnal_amplitude * std::sin(2.0 * std::numbers::pi * tod));
    }
    return p;
}

Panel generate_panel(const OracleSpec& spec) {
    const OracleProcess p = simulate(spec);
    Eigen::MatrixXd x = p.stochastic + p.diurnal;
    const double lo = x.minCoeff(), hi = x.maxCoeff();
    if (hi > lo)
        x = (x.array() - lo) / (hi - lo);
    else
        x.setZero();
    for (Index n = 0; n < spec.sites; ++n) x.col(n) *= spec.capacities(n);
    std::vector<std::string> ids;
    for (Index n = 0; n < spec.sites; ++n) ids.push_back("site" + std::to_string(n + 1));
    return make_panel(std::move(x), spec.start, spec.dt, std::move(ids), spec.capacities, false);
}

CrossSpectrum analytic_cpsd(const OracleSpec& spec, Index max_lag) {
    spec.validate();
    if (max_lag < 0) throw ConfigError("max_lag must be >= 0");
    using cd = std::complex<double>;
    CrossSpectrum s;
    s.max_lag = max_lag;
    s.dt = static_cast<double>(spec.dt);
    const Index M = 2 * max_lag + 1;
    const double var_e = spec.innovation_sd * spec.innovation_sd;
    for (Index m = 0; m < M; ++m) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);
        const double sf = var_e / std::norm(1.0 - spec.rho * std::polar(1.0, -w));
        Eigen::MatrixXcd L(spec.sites, spec.factors);
        for (Index n = 0; n < spec.sites; ++n)
            for (Index k = 0; k < spec.factors; ++k)
                L(n, k) = spec.loadings(n, k) * std::polar(1.0, -w * static_cast<double>(spec.lags[static_cast<std::size_t>(n)]));
        Eigen::MatrixXcd S = sf * L * L.adjoint();
        S.diagonal().array() += cd(spec.noise_sd * spec.noise_sd, 0.0);
        s.matrices.push_back(0.5 * (S + S.adjoint()));
    }
    return s;
}

}  // namespace gdfmgan
