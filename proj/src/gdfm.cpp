#include "gdfmgan/gdfm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "binary_io.hpp"
#include "gdfmgan/errors.hpp"

namespace gdfmgan {

using cd = std::complex<double>;

namespace {

void normalize_phase(Eigen::MatrixXcd& v) {
    for (Index c = 0; c < v.cols(); ++c) {
        Index best = 0;
        double best_abs = -1.0;
        for (Index r = 0; r < v.rows(); ++r) {
            const double a = std::abs(v(r, c));
            if (a > best_abs * (1.0 + 1e-12)) {
                best_abs = a;
                best = r;
            }
        }
        if (best_abs > 0.0) v.col(c) *= std::conj(v(best, c)) / best_abs;
        v(best, c) = cd(v(best, c).real(), 0.0);
    }
}

void check_same_grid(const CrossSpectrum& a, const CrossSpectrum& b) {
    if (a.bins() != b.bins() || a.sites() != b.sites()) throw ShapeError("spectra are on different grids");
}

}  // namespace

FilterTensor FilterBank::magnitude(Index bins_wanted) const {
    const Index m_bins = bins_wanted < 0 ? bins() : bins_wanted;
    FilterTensor t(factors(), sites(), m_bins);
    for (Index m = 0; m < m_bins; ++m)
        for (Index k = 0; k < factors(); ++k)
            for (Index n = 0; n < sites(); ++n) t(k, n, m) = std::abs(filter[static_cast<std::size_t>(m)](k, n));
    return t;
}

FilterTensor FilterBank::phase(Index bins_wanted) const {
    const Index m_bins = bins_wanted < 0 ? bins() : bins_wanted;
    FilterTensor t(factors(), sites(), m_bins);
    for (Index m = 0; m < m_bins; ++m)
        for (Index k = 0; k < factors(); ++k)
            for (Index n = 0; n < sites(); ++n) {
                double a = std::arg(filter[static_cast<std::size_t>(m)](k, n));
                if (a <= -std::numbers::pi) a = std::numbers::pi;
                t(k, n, m) = a;
            }
    return t;
}

SpectralFactorization dpca_split(const CrossSpectrum& spectrum, Index q) {
    const Index n = spectrum.sites();
    const Index m_bins = spectrum.bins();
    if (q < 1 || q > n) throw ConfigError("q must lie in [1, N]; got " + std::to_string(q));

    SpectralFactorization f;
    f.q = q;
    f.max_lag = spectrum.max_lag;
    f.dt = spectrum.dt;
    f.eigenvalues.resize(static_cast<std::size_t>(m_bins));
    f.eigenvectors.resize(static_cast<std::size_t>(m_bins));

    const Index half = spectrum.half_bins();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver;
    for (Index m = 0; m < std::min(half, m_bins); ++m) {
        const auto& s = spectrum.matrices[static_cast<std::size_t>(m)];
        solver.compute(s);
        if (solver.info() != Eigen::Success)
            throw NumericsError("Hermitian eigensolver did not converge at bin " + std::to_string(m));
        const Eigen::VectorXd& ascending = solver.eigenvalues();
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::reverse(order.begin(), order.end());
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ascending[a] > ascending[b]; });

        Eigen::VectorXd values(n);
        Eigen::MatrixXcd vectors(n, n);
        for (Index c = 0; c < n; ++c) {
            values[c] = ascending[order[static_cast<std::size_t>(c)]];
            vectors.col(c) = solver.eigenvectors().col(order[static_cast<std::size_t>(c)]);
        }
        normalize_phase(vectors);

        const double trace = std::abs(s.trace().real());
        const Eigen::VectorXcd rayleigh = (vectors.adjoint() * s * vectors).diagonal();
        if (trace > 0.0) f.max_imag_eigenvalue = std::max(f.max_imag_eigenvalue, rayleigh.imag().cwiseAbs().maxCoeff() / trace);
        for (Index c = 1; c < n; ++c)
            if (std::abs(values[c - 1] - values[c]) <= 1e-12 * trace) {
                ++f.tie_bins;
                break;
            }
        f.eigenvalues[static_cast<std::size_t>(m)] = std::move(values);
        f.eigenvectors[static_cast<std::size_t>(m)] = std::move(vectors);
    }
    for (Index m = half; m < m_bins; ++m) {
        f.eigenvalues[static_cast<std::size_t>(m)] = f.eigenvalues[static_cast<std::size_t>(m_bins - m)];
        f.eigenvectors[static_cast<std::size_t>(m)] = f.eigenvectors[static_cast<std::size_t>(m_bins - m)].conjugate();
    }
    return f;
}

Index select_q(const CrossSpectrum& spectrum, double share) {
    if (!(share > 0.0 && share <= 1.0)) throw ConfigError("share must lie in (0, 1]");
    const Index n = spectrum.sites();
    const SpectralFactorization f = dpca_split(spectrum, n);
    Eigen::VectorXd cumulative = Eigen::VectorXd::Zero(n);
    double total = 0.0;
    for (const auto& values : f.eigenvalues) {
        double running = 0.0;
        for (Index i = 0; i < n; ++i) {
            running += values[i];
            cumulative[i] += running;
        }
        total += values.sum();
    }
    if (!(total > 0.0)) return n;
    for (Index i = 0; i < n; ++i)
        if (cumulative[i] / total >= share - 1e-12) return i + 1;
    return n;
}

FilterBank extract_filter(const SpectralFactorization& fact) {
    FilterBank bank;
    bank.max_lag = fact.max_lag;
    bank.dt = fact.dt;
    bank.loading.reserve(fact.eigenvectors.size());
    bank.filter.reserve(fact.eigenvectors.size());
    for (const auto& v : fact.eigenvectors) {
        bank.loading.push_back(v.leftCols(fact.q));
        bank.filter.push_back(v.leftCols(fact.q).adjoint());
    }
    return bank;
}

FilterBank apply_magnitudes(const FilterBank& observed, const FilterTensor& half_magnitudes) {
    const Index q = observed.factors();
    const Index n = observed.sites();
    const Index m_bins = observed.bins();
    const Index half = observed.half_bins();
    if (half_magnitudes.factors != q || half_magnitudes.sites != n || half_magnitudes.bins != half)
        throw ShapeError("magnitude tensor shape does not match the filter bank");
    FilterBank out = observed;
    for (Index m = 0; m < half; ++m) {
        auto& b = out.filter[static_cast<std::size_t>(m)];
        for (Index k = 0; k < q; ++k)
            for (Index j = 0; j < n; ++j) {
                const cd observed_b = observed.filter[static_cast<std::size_t>(m)](k, j);
                const double angle = observed_b == cd(0.0, 0.0) ? 0.0 : std::arg(observed_b);
                b(k, j) = std::polar(half_magnitudes(k, j, m), angle);
            }
        if (m == 0) b = b.real().cast<cd>();  // the zero-frequency bin stays real
    }
    for (Index m = half; m < m_bins; ++m)
        out.filter[static_cast<std::size_t>(m)] = out.filter[static_cast<std::size_t>(m_bins - m)].conjugate();
    return out;
}

CommonSpectrum common_spectrum(const CrossSpectrum& spectrum, const FilterBank& bank) {
    if (bank.bins() != spectrum.bins() || bank.sites() != spectrum.sites())
        throw ShapeError("filter bank does not match the spectrum grid");
    CommonSpectrum out;
    out.spectrum.max_lag = spectrum.max_lag;
    out.spectrum.dt = spectrum.dt;
    out.spectrum.matrices.reserve(spectrum.matrices.size());
    for (Index m = 0; m < spectrum.bins(); ++m) {
        const auto i = static_cast<std::size_t>(m);
        if (bank.loading[i].rows() != spectrum.sites() || bank.loading[i].cols() != bank.factors())
            throw ShapeError("loading matrix has the wrong shape at bin " + std::to_string(m));
        const Eigen::MatrixXcd raw = bank.loading[i] * bank.filter[i] * spectrum.matrices[i];
        Eigen::MatrixXcd sym = 0.5 * (raw + raw.adjoint());
        out.symmetrization_delta = std::max(out.symmetrization_delta, (raw - sym).cwiseAbs().maxCoeff());
        out.spectrum.matrices.push_back(std::move(sym));
    }
    return out;
}

namespace {

CrossSpectrum partial_spectrum(const SpectralFactorization& fact, Index first, Index count) {
    CrossSpectrum s;
    s.max_lag = fact.max_lag;
    s.dt = fact.dt;
    s.matrices.reserve(fact.eigenvectors.size());
    for (std::size_t m = 0; m < fact.eigenvectors.size(); ++m) {
        const auto v = fact.eigenvectors[m].middleCols(first, count);
        const auto w = fact.eigenvalues[m].segment(first, count);
        Eigen::MatrixXcd part = v * w.cast<cd>().asDiagonal() * v.adjoint();
        s.matrices.push_back(0.5 * (part + part.adjoint()));
    }
    return s;
}

}  // namespace

CrossSpectrum idiosyncratic_spectrum(const SpectralFactorization& fact) {
    return partial_spectrum(fact, fact.q, fact.sites() - fact.q);
}

CrossSpectrum common_part(const SpectralFactorization& fact) { return partial_spectrum(fact, 0, fact.q); }

CrossSpectrum assemble_spectrum(const CrossSpectrum& common, const CrossSpectrum& idio) {
    check_same_grid(common, idio);
    CrossSpectrum out = common;
    double scale = 0.0;
    for (std::size_t m = 0; m < out.matrices.size(); ++m) {
        out.matrices[m] += idio.matrices[m];
        scale = std::max(scale, out.matrices[m].cwiseAbs().maxCoeff());
    }
    if (hermitian_defect(out) > 1e-10 * std::max(scale, 1e-300))
        throw NumericsError("assembled spectrum is not Hermitian");
    return out;
}

Panel spca_reconstruct(const Eigen::MatrixXd& zero_lag, const Panel& source_panel, Index q) {
    const Index n = source_panel.sites();
    if (zero_lag.rows() != n || zero_lag.cols() != n) throw ShapeError("zero-lag matrix does not match panel sites");
    if (q < 1 || q > n) throw ConfigError("q must lie in [1, N]");
    const Eigen::MatrixXd source_cov = lag_covariance(source_panel.values, 0, 1.0).at(0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(source_cov);
    if (solver.info() != Eigen::Success) throw NumericsError("static eigendecomposition failed");

    const double floor = 1e-10 * std::abs(source_cov.trace());
    // eigenvalues ascend; the last q columns are the leading ones
    Eigen::MatrixXd projector = Eigen::MatrixXd::Zero(n, n);  // P_q Lambda_q^-1 P_q^T
    Index kept = 0;
    for (Index c = n - 1; c >= n - q; --c) {
        const double lambda = solver.eigenvalues()[c];
        if (!(lambda > floor)) continue;
        const auto p = solver.eigenvectors().col(c);
        projector.noalias() += (p / lambda) * p.transpose();
        ++kept;
    }
    if (kept == 0) throw RankError("zero-lag covariance of the source panel has no usable eigenvalue");

    const Eigen::MatrixXd phi_hat = 0.5 * (zero_lag + zero_lag.transpose());
    Panel out = source_panel;
    out.values = source_panel.values * projector * phi_hat;  // (Phi_hat P Lambda^-1 P^T X^T)^T
    if (!out.values.allFinite()) throw NumericsError("SPCA reconstruction produced non-finite values");
    return out;
}

FilterBank IdentitySampler::sample(const FilterBank& observed, std::mt19937_64&) const { return observed; }

BootstrapSampler::BootstrapSampler(std::vector<FilterTensor> half_magnitudes) : magnitudes_(std::move(half_magnitudes)) {
    if (magnitudes_.empty()) throw ConfigError("bootstrap sampler needs at least one magnitude tensor");
}

FilterBank BootstrapSampler::sample(const FilterBank& observed, std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, magnitudes_.size() - 1);
    return apply_magnitudes(observed, magnitudes_[pick(rng)]);
}

ScenarioBlock synthesize_scenario(const Panel& block, const FilterSampler& sampler, Index max_lag, Index q,
                                  std::uint64_t seed) {
    const CrossSpectrum spectrum = cpsd(lag_covariance(block, max_lag));
    const SpectralFactorization fact = dpca_split(spectrum, q);
    const FilterBank observed = extract_filter(fact);

    std::mt19937_64 rng(seed);
    const FilterBank synthetic = sampler.sample(observed, rng);

    const CommonSpectrum common = common_spectrum(spectrum, synthetic);
    const CrossSpectrum total = assemble_spectrum(common.spectrum, idiosyncratic_spectrum(fact));
    const LagCovSeq lags = inverse_cpsd(total);

    ScenarioBlock out;
    out.zero_lag = lags.at(0);
    out.symmetrization_delta = common.symmetrization_delta;
    out.imag_residual = lags.imag_residual;
    out.panel = spca_reconstruct(out.zero_lag, block, q);
    return out;
}

void write_filter_banks(const std::string& path, std::span<const FilterBank> banks) {
    if (banks.empty()) throw ShapeError("no filter banks to write");
    const FilterBank& head = banks.front();
    detail::BinaryWriter w(path);
    detail::write_tensor_header(
        w, {detail::TensorKind::FilterBank,
            {static_cast<std::uint64_t>(head.factors()), static_cast<std::uint64_t>(head.sites()),
             static_cast<std::uint64_t>(head.bins()), static_cast<std::uint64_t>(banks.size())},
            head.dt});
    for (const auto& bank : banks) {
        if (bank.factors() != head.factors() || bank.sites() != head.sites() || bank.bins() != head.bins())
            throw ShapeError("filter banks differ in shape");
        for (const FilterTensor& t : {bank.magnitude(), bank.phase()})
            for (double v : t.data) w.f64(v);
    }
    w.finish();
}

std::vector<FilterBank> read_filter_banks(const std::string& path) {
    detail::BinaryReader r(path);
    const auto h = detail::read_tensor_header(r, detail::TensorKind::FilterBank);
    const auto q = static_cast<Index>(h.dims[0]);
    const auto n = static_cast<Index>(h.dims[1]);
    const auto m_bins = static_cast<Index>(h.dims[2]);
    const auto count = static_cast<std::size_t>(h.dims[3]);
    if (m_bins % 2 != 1) throw IoError("filter bank file has an even bin count in '" + path + "'");

    std::vector<FilterBank> banks(count);
    for (auto& bank : banks) {
        FilterTensor mag(q, n, m_bins), ph(q, n, m_bins);
        for (double& v : mag.data) v = r.f64();
        for (double& v : ph.data) v = r.f64();
        bank.max_lag = (m_bins - 1) / 2;
        bank.dt = h.dt;
        for (Index m = 0; m < m_bins; ++m) {
            Eigen::MatrixXcd b(q, n);
            for (Index k = 0; k < q; ++k)
                for (Index j = 0; j < n; ++j) b(k, j) = std::polar(mag(k, j, m), ph(k, j, m));
            bank.loading.push_back(b.adjoint());
            bank.filter.push_back(std::move(b));
        }
    }
    return banks;
}

}  // namespace gdfmgan
