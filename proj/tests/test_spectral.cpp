#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gdfmgan/errors.hpp"
#include "gdfmgan/spectral.hpp"
#include "helpers.hpp"

using namespace gdfmgan;
using cd = std::complex<double>;
using testing_helpers::random_matrix;

namespace {

LagCovSeq random_lag_sequence(Index n, Index max_lag, std::mt19937_64& rng) {
    LagCovSeq seq;
    seq.max_lag = max_lag;
    seq.dt = 300.0;
    seq.matrices.assign(static_cast<std::size_t>(2 * max_lag + 1), Eigen::MatrixXd());
    const Eigen::MatrixXd a = random_matrix(n, n, rng);
    seq.at(0) = a * a.transpose();
    for (Index k = 1; k <= max_lag; ++k) {
        seq.at(k) = random_matrix(n, n, rng) * 0.3;
        seq.at(-k) = seq.at(k).transpose();
    }
    return seq;
}

Eigen::MatrixXcd brute_force(const LagCovSeq& seq, Index m) {
    const Index M = 2 * seq.max_lag + 1;
    const double w = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(M);
    const Index n = seq.sites();
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(n, n);
    for (Index k = -seq.max_lag; k <= seq.max_lag; ++k)
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) s(i, j) += seq.at(k)(i, j) * std::polar(1.0, -static_cast<double>(k) * w);
    return 0.5 * (s + s.adjoint());
}

}  // namespace

TEST(LagCovariance, WhiteNoiseMonteCarlo) {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd x = random_matrix(100000, 2, rng);
    const LagCovSeq seq = lag_covariance(x, 10, 300.0);
    EXPECT_LT((seq.at(0) - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 0.02);
    for (Index k = 1; k <= 10; ++k) {
        EXPECT_LT(seq.at(k).cwiseAbs().maxCoeff(), 0.02);
        EXPECT_LT(seq.at(-k).cwiseAbs().maxCoeff(), 0.02);
    }
}

TEST(LagCovariance, ZeroPanel) {
    const LagCovSeq seq = lag_covariance(Eigen::MatrixXd::Zero(100, 3), 5, 1.0);
    for (const auto& m : seq.matrices) EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LagCovariance, CosineClosedForm) {
    const Index T = 10000, P = 50, K = 20;
    Eigen::MatrixXd x(T, 1);
    for (Index t = 0; t < T; ++t) x(t, 0) = std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / P);
    const LagCovSeq seq = lag_covariance(x, K, 1.0);
    for (Index k = -K; k <= K; ++k) {
        const double w = 1.0 - std::abs(static_cast<double>(k)) / static_cast<double>(K + 1);
        const double expected = w * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / P) / 2.0;
        EXPECT_NEAR(seq.at(k)(0, 0), expected, 2.0 / P) << "k=" << k;
        // direct summation of the biased estimator
        double direct = 0.0;
        const double mean = x.mean();
        const Index ak = std::abs(k);
        for (Index t = ak; t < T; ++t) direct += (x(t, 0) - mean) * (x(t - ak, 0) - mean);
        EXPECT_NEAR(seq.at(k)(0, 0), w * direct / T, 1e-12);
    }
}

TEST(LagCovariance, TransposeSymmetryAndPsd) {
    std::mt19937_64 rng(12);
    Eigen::MatrixXd x = random_matrix(500, 4, rng);
    for (Index t = 1; t < 500; ++t) x.row(t) += 0.8 * x.row(t - 1);
    const LagCovSeq seq = lag_covariance(x, 20, 1.0);
    for (Index k = 0; k <= 20; ++k) EXPECT_EQ((seq.at(-k) - seq.at(k).transpose()).cwiseAbs().maxCoeff(), 0.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(seq.at(0));
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * seq.at(0).trace());
}

TEST(LagCovariance, Errors) {
    EXPECT_THROW(lag_covariance(Eigen::MatrixXd::Zero(40, 2), 10, 1.0), LagError);
    EXPECT_NO_THROW(lag_covariance(Eigen::MatrixXd::Zero(41, 2), 10, 1.0));
    Panel raw = make_panel(Eigen::MatrixXd::Zero(100, 1), 0, 300, {"a"}, Eigen::VectorXd::Ones(1));
    EXPECT_THROW(lag_covariance(raw, 5), DataError);
}

TEST(Cpsd, WhiteSequenceIsFlat) {
    LagCovSeq seq;
    seq.max_lag = 4;
    seq.matrices.assign(9, Eigen::MatrixXd::Zero(3, 3));
    seq.at(0) = Eigen::MatrixXd::Identity(3, 3);
    const CrossSpectrum s = cpsd(seq);
    ASSERT_EQ(s.bins(), 9);
    for (const auto& m : s.matrices) EXPECT_LT((m - Eigen::MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    const LagCovSeq back = inverse_cpsd(s);
    EXPECT_LT((back.at(0) - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
    for (Index k = 1; k <= 4; ++k) EXPECT_LT(back.at(k).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Cpsd, BruteForceOracleAllSmallShapes) {
    std::mt19937_64 rng(13);
    for (Index K = 0; K <= 8; ++K)
        for (Index N = 1; N <= 4; ++N) {
            const LagCovSeq seq = random_lag_sequence(N, K, rng);
            const CrossSpectrum s = cpsd(seq);
            ASSERT_EQ(s.bins(), 2 * K + 1);
            for (Index m = 0; m < s.bins(); ++m)
                EXPECT_LT((s.matrices[static_cast<std::size_t>(m)] - brute_force(seq, m)).cwiseAbs().maxCoeff(), 1e-9)
                    << "K=" << K << " N=" << N << " m=" << m;
        }
}

TEST(Cpsd, RoundTripParsevalAndSymmetry) {
    std::mt19937_64 rng(14);
    for (int rep = 0; rep < 20; ++rep) {
        const Index K = 1 + rep % 9, N = 1 + rep % 4;
        const LagCovSeq seq = random_lag_sequence(N, K, rng);
        const CrossSpectrum s = cpsd(seq);
        EXPECT_LT(hermitian_defect(s), 1e-12);
        EXPECT_LT(conjugate_symmetry_defect(s), 1e-12);

        const LagCovSeq back = inverse_cpsd(s);
        for (Index k = -K; k <= K; ++k) EXPECT_LT((back.at(k) - seq.at(k)).cwiseAbs().maxCoeff(), 1e-9);

        cd trace_sum = 0.0;
        for (const auto& m : s.matrices) trace_sum += m.trace();
        const double lhs = trace_sum.real() / static_cast<double>(s.bins());
        EXPECT_NEAR(lhs, seq.at(0).trace(), 1e-9 * std::abs(seq.at(0).trace()));
    }
}

TEST(Cpsd, EstimatedSpectrumHasNonNegativeDiagonal) {
    std::mt19937_64 rng(15);
    Eigen::MatrixXd x = random_matrix(2000, 3, rng);
    for (Index t = 2; t < 2000; ++t) x.row(t) += 0.6 * x.row(t - 1) - 0.3 * x.row(t - 2);
    const CrossSpectrum s = cpsd(lag_covariance(x, 40, 1.0));
    for (const auto& m : s.matrices) {
        EXPECT_LT((m - m.adjoint()).cwiseAbs().maxCoeff(), 1e-10 * m.cwiseAbs().maxCoeff());
        for (Index i = 0; i < 3; ++i) EXPECT_GE(m(i, i).real(), -1e-10 * m.trace().real());
    }
}

TEST(InverseCpsd, BrokenConjugateSymmetryRaises) {
    std::mt19937_64 rng(16);
    CrossSpectrum s = cpsd(random_lag_sequence(2, 3, rng));
    s.matrices[1](0, 1) += cd(0.0, 1.0);
    s.matrices[1](1, 0) -= cd(0.0, 1.0);  // still Hermitian, no longer mirrored
    EXPECT_THROW(inverse_cpsd(s), SymmetryError);
}

TEST(Welch, WhiteNoiseIsFlat) {
    std::mt19937_64 rng(17);
    const Index T = 1 << 16;
    const Eigen::VectorXd x = random_matrix(T, 1, rng).col(0);
    const double dt = 300.0;
    const PsdEstimate p = welch_psd(x, dt, default_segment_len(T), 0.5, "hann");
    EXPECT_EQ(p.segment_len, 8192);
    EXPECT_EQ(p.window, "hann");
    // one-sided density of unit white noise: 2 * dt
    const double level = 2.0 * dt;
    const double interior = p.power.segment(1, p.power.size() - 2).mean();
    EXPECT_LT(std::abs(interior - level) / level, 0.05);
    const double total = p.power.sum() * p.resolution();
    const double var = (x.array() - x.mean()).square().mean();
    EXPECT_LT(std::abs(total - var) / var, 0.05);
    EXPECT_GE(p.power.minCoeff(), 0.0);
}

TEST(Welch, SinusoidPeakHoldsHalfTheSquaredAmplitude) {
    const Index T = 1 << 14, L = 1024;
    const double a = 3.0, dt = 1.0;
    const double f0 = 64.0 / L;  // on a bin
    Eigen::VectorXd x(T);
    for (Index t = 0; t < T; ++t) x[t] = a * std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(t));
    const PsdEstimate p = welch_psd(x, dt, L, 0.5, "hann");
    Index peak = 0;
    p.power.maxCoeff(&peak);
    EXPECT_EQ(peak, 64);
    const double peak_energy = p.power.segment(peak - 2, 5).sum() * p.resolution();
    EXPECT_NEAR(peak_energy, a * a / 2.0, 0.05 * a * a / 2.0);
    EXPECT_GT(peak_energy / (p.power.sum() * p.resolution()), 0.99);
}

TEST(Welch, ZeroSeriesAndErrors) {
    const PsdEstimate p = welch_psd(Eigen::VectorXd::Zero(256), 1.0, 64);
    EXPECT_EQ(p.power.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(welch_psd(Eigen::VectorXd::Zero(32), 1.0, 64), SegmentError);
    EXPECT_THROW(welch_psd(Eigen::VectorXd::Zero(256), 1.0, 64, 0.95), SegmentError);
    EXPECT_THROW(welch_psd(Eigen::VectorXd::Zero(256), 1.0, 64, 0.5, "kaiser"), ConfigError);
}

TEST(Defaults, LagAndSegment) {
    EXPECT_EQ(default_max_lag(2880), 53);
    EXPECT_EQ(default_max_lag(10000000), 720);
    EXPECT_EQ(default_segment_len(28800), 2048);
}

TEST(SpectrumIo, BinaryRoundTripIsExact) {
    std::mt19937_64 rng(18);
    const CrossSpectrum s = cpsd(random_lag_sequence(3, 5, rng));
    const auto path = testing_helpers::temp_path("spectrum.bin");
    write_spectrum(path, s);
    const CrossSpectrum r = read_spectrum(path);
    ASSERT_EQ(r.bins(), s.bins());
    EXPECT_EQ(r.max_lag, 5);
    EXPECT_EQ(r.dt, s.dt);
    for (Index m = 0; m < s.bins(); ++m)
        EXPECT_EQ((r.matrices[static_cast<std::size_t>(m)] - s.matrices[static_cast<std::size_t>(m)]).cwiseAbs().maxCoeff(), 0.0);

    const auto csv = testing_helpers::temp_path("diag.csv");
    write_spectrum_diagonals(csv, s, {"a", "b", "c"});
    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "bin,omega,a,b,c");

    std::ofstream junk(testing_helpers::temp_path("junk.bin"), std::ios::binary);
    junk << "not a tensor";
    junk.close();
    EXPECT_THROW(read_spectrum(testing_helpers::temp_path("junk.bin")), IoError);
}
