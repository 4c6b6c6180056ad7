#include "gdfmgan/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "binary_io.hpp"
#include "csv.hpp"
#include "fft.hpp"
#include "gdfmgan/errors.hpp"

namespace gdfmgan {

using cd = std::complex<double>;

double CrossSpectrum::omega(Index m) const {
    return 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(bins());
}

Index default_max_lag(Index steps) {
    const auto k = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(steps))));
    return std::min<Index>(k, 720);
}

LagCovSeq lag_covariance(const Eigen::MatrixXd& values, Index max_lag, double dt, bool taper) {
    const Index t = values.rows();
    const Index n = values.cols();
    if (max_lag < 0) throw LagError("max lag must be non-negative");
    if (4 * max_lag >= t) throw LagError("max lag " + std::to_string(max_lag) + " must be below T/4 (T = " +
                                         std::to_string(t) + ")");
    const Eigen::MatrixXd x = values.rowwise() - values.colwise().mean();

    LagCovSeq out;
    out.max_lag = max_lag;
    out.dt = dt;
    out.matrices.assign(static_cast<std::size_t>(2 * max_lag + 1), Eigen::MatrixXd::Zero(n, n));
    for (Index k = 0; k <= max_lag; ++k) {
        // Phi(k) = (1/T) sum_t x_t x_{t-k}^T
        Eigen::MatrixXd phi = x.bottomRows(t - k).transpose() * x.topRows(t - k) / static_cast<double>(t);
        if (taper) phi *= 1.0 - static_cast<double>(k) / static_cast<double>(max_lag + 1);
        if (k == 0) phi = 0.5 * (phi + phi.transpose()).eval();
        out.at(-k) = phi.transpose();
        out.at(k) = std::move(phi);
    }
    return out;
}

LagCovSeq lag_covariance(const Panel& panel, Index max_lag) {
    if (!panel.normalized) throw DataError("lag_covariance expects a normalized panel");
    return lag_covariance(panel.values, max_lag, static_cast<double>(panel.dt()));
}

CrossSpectrum cpsd(const LagCovSeq& lagcov) {
    const Index k_max = lagcov.max_lag;
    const Index m_bins = 2 * k_max + 1;
    const Index n = lagcov.sites();
    if (static_cast<Index>(lagcov.matrices.size()) != m_bins) throw ShapeError("lag sequence length is not 2K+1");

    CrossSpectrum s;
    s.max_lag = k_max;
    s.dt = lagcov.dt;
    s.matrices.assign(static_cast<std::size_t>(m_bins), Eigen::MatrixXcd::Zero(n, n));
    const Index half = m_bins / 2 + 1;

    // S(w_m) = sum_k Phi(k) e^{-jk w_m} = e^{jK w_m} * DFT_r[Phi(r - K)]
    detail::RealDft dft(static_cast<int>(m_bins));
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            for (Index r = 0; r < m_bins; ++r) dft.input()[r] = lagcov.matrices[static_cast<std::size_t>(r)](i, j);
            dft.execute();
            for (Index m = 0; m < half; ++m) {
                const double w = s.omega(m);
                s.matrices[static_cast<std::size_t>(m)](i, j) =
                    dft.output()[m] * std::polar(1.0, static_cast<double>(k_max) * w);
            }
        }
    }
    for (Index m = 0; m < half; ++m) {
        auto& sm = s.matrices[static_cast<std::size_t>(m)];
        sm = (0.5 * (sm + sm.adjoint())).eval();
    }
    for (Index m = half; m < m_bins; ++m)
        s.matrices[static_cast<std::size_t>(m)] = s.matrices[static_cast<std::size_t>(m_bins - m)].conjugate();
    return s;
}

LagCovSeq inverse_cpsd(const CrossSpectrum& spectrum) {
    const Index m_bins = spectrum.bins();
    if (m_bins % 2 != 1) throw ShapeError("spectrum must have an odd number of bins (M = 2K + 1)");
    const Index k_max = (m_bins - 1) / 2;
    const Index n = spectrum.sites();

    LagCovSeq out;
    out.max_lag = k_max;
    out.dt = spectrum.dt;
    out.matrices.assign(static_cast<std::size_t>(m_bins), Eigen::MatrixXd::Zero(n, n));

    // Phi(kappa) = (1/M) sum_m S(w_m) e^{+j kappa w_m}, kappa = r - K
    detail::ComplexDft dft(static_cast<int>(m_bins), FFTW_BACKWARD);
    double max_imag = 0.0;
    double max_real = 0.0;
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            for (Index m = 0; m < m_bins; ++m)
                dft.data()[m] = spectrum.matrices[static_cast<std::size_t>(m)](i, j) *
                                std::polar(1.0, -static_cast<double>(k_max) * spectrum.omega(m));
            dft.execute();
            for (Index r = 0; r < m_bins; ++r) {
                const cd v = dft.data()[r] / static_cast<double>(m_bins);
                out.matrices[static_cast<std::size_t>(r)](i, j) = v.real();
                max_imag = std::max(max_imag, std::abs(v.imag()));
                max_real = std::max(max_real, std::abs(v.real()));
            }
        }
    }
    out.imag_residual = max_imag;
    if (max_imag > 1e-8 * max_real)
        throw SymmetryError("inverse transform has imaginary residual " + std::to_string(max_imag) +
                            " against real scale " + std::to_string(max_real));
    return out;
}

double hermitian_defect(const CrossSpectrum& spectrum) {
    double d = 0.0;
    for (const auto& s : spectrum.matrices) d = std::max(d, (s - s.adjoint()).cwiseAbs().maxCoeff());
    return d;
}

double conjugate_symmetry_defect(const CrossSpectrum& spectrum) {
    const Index m_bins = spectrum.bins();
    double d = 0.0;
    for (Index m = 1; m < m_bins; ++m)
        d = std::max(d, (spectrum.matrices[static_cast<std::size_t>(m_bins - m)] -
                         spectrum.matrices[static_cast<std::size_t>(m)].conjugate())
                            .cwiseAbs()
                            .maxCoeff());
    if (m_bins > 0) d = std::max(d, spectrum.matrices[0].imag().cwiseAbs().maxCoeff());
    return d;
}

void hermitian_symmetrize(CrossSpectrum& spectrum) {
    for (auto& s : spectrum.matrices) s = (0.5 * (s + s.adjoint())).eval();
}

Index default_segment_len(Index steps) {
    if (steps < 16) return std::max<Index>(steps, 1);
    return Index{1} << static_cast<int>(std::floor(std::log2(static_cast<double>(steps) / 8.0)));
}

namespace {

Eigen::VectorXd make_window(const std::string& name, Index len) {
    Eigen::VectorXd w(len);
    const double n = static_cast<double>(len);
    for (Index i = 0; i < len; ++i) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
        if (name == "hann") w[i] = 0.5 - 0.5 * std::cos(phase);
        else if (name == "hamming") w[i] = 0.54 - 0.46 * std::cos(phase);
        else if (name == "rect") w[i] = 1.0;
        else throw ConfigError("unknown window '" + name + "' (expected hann|hamming|rect)");
    }
    return w;
}

}  // namespace

PsdEstimate welch_psd(const Eigen::VectorXd& series, double dt, Index segment_len, double overlap,
                      const std::string& window) {
    const Index t = series.size();
    if (segment_len < 1) throw SegmentError("segment length must be positive");
    if (segment_len > t)
        throw SegmentError("segment length " + std::to_string(segment_len) + " exceeds series length " +
                           std::to_string(t));
    if (!(overlap >= 0.0 && overlap <= 0.9)) throw SegmentError("overlap must lie in [0, 0.9]");
    if (!(dt > 0.0)) throw SamplingError("sampling interval must be positive");

    const Eigen::VectorXd w = make_window(window, segment_len);
    const Index step = std::max<Index>(1, segment_len - static_cast<Index>(std::llround(overlap * segment_len)));
    const Index segments = (t - segment_len) / step + 1;
    const Index bins = segment_len / 2 + 1;
    const double fs = 1.0 / dt;
    const double scale = 1.0 / (fs * w.squaredNorm());

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(bins);
    detail::RealDft dft(static_cast<int>(segment_len));
    for (Index s = 0; s < segments; ++s) {
        const auto seg = series.segment(s * step, segment_len);
        const double mean = seg.mean();
        for (Index i = 0; i < segment_len; ++i) dft.input()[i] = (seg[i] - mean) * w[i];
        dft.execute();
        for (Index b = 0; b < bins; ++b) acc[b] += std::norm(dft.output()[b]);
    }

    PsdEstimate psd;
    psd.power = acc * (scale / static_cast<double>(segments));
    // one-sided: double everything except DC and (even length) Nyquist
    const Index last = (segment_len % 2 == 0) ? bins - 1 : bins;
    for (Index b = 1; b < last; ++b) psd.power[b] *= 2.0;
    psd.frequencies.resize(bins);
    for (Index b = 0; b < bins; ++b) psd.frequencies[b] = static_cast<double>(b) * fs / static_cast<double>(segment_len);
    psd.segment_len = segment_len;
    psd.segments = segments;
    psd.overlap = overlap;
    psd.window = window;
    return psd;
}

void write_spectrum(const std::string& path, const CrossSpectrum& spectrum) {
    detail::BinaryWriter w(path);
    detail::write_tensor_header(
        w, {detail::TensorKind::CrossSpectrum,
            {static_cast<std::uint64_t>(spectrum.bins()), static_cast<std::uint64_t>(spectrum.sites()),
             static_cast<std::uint64_t>(spectrum.max_lag), 0},
            spectrum.dt});
    for (const auto& s : spectrum.matrices)
        for (Index i = 0; i < s.rows(); ++i)
            for (Index j = 0; j < s.cols(); ++j) {
                w.f64(s(i, j).real());
                w.f64(s(i, j).imag());
            }
    w.finish();
}

CrossSpectrum read_spectrum(const std::string& path) {
    detail::BinaryReader r(path);
    const auto h = detail::read_tensor_header(r, detail::TensorKind::CrossSpectrum);
    const auto m_bins = static_cast<Index>(h.dims[0]);
    const auto n = static_cast<Index>(h.dims[1]);
    CrossSpectrum s;
    s.max_lag = static_cast<Index>(h.dims[2]);
    if (m_bins != 2 * s.max_lag + 1) throw IoError("inconsistent spectrum header in '" + path + "'");
    s.dt = h.dt;
    s.matrices.assign(static_cast<std::size_t>(m_bins), Eigen::MatrixXcd(n, n));
    for (auto& mat : s.matrices)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                const double re = r.f64();
                const double im = r.f64();
                mat(i, j) = cd(re, im);
            }
    return s;
}

void write_spectrum_diagonals(const std::string& path, const CrossSpectrum& spectrum,
                              const std::vector<std::string>& site_ids) {
    auto out = detail::open_out(path);
    out << "bin,omega";
    for (const auto& id : site_ids) out << ',' << id;
    out << '\n';
    for (Index m = 0; m < spectrum.bins(); ++m) {
        out << m << ',' << spectrum.omega(m);
        for (Index n = 0; n < spectrum.sites(); ++n) out << ',' << spectrum.matrices[static_cast<std::size_t>(m)](n, n).real();
        out << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace gdfmgan
