#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gdfmgan/errors.hpp"
#include "gdfmgan/gdfm.hpp"
#include "helpers.hpp"

using namespace gdfmgan;
using cd = std::complex<double>;
using testing_helpers::max_abs;
using testing_helpers::random_matrix;
using testing_helpers::random_spectrum;

namespace {

CrossSpectrum constant_spectrum(const Eigen::MatrixXcd& s, Index max_lag) {
    CrossSpectrum out;
    out.max_lag = max_lag;
    out.dt = 1.0;
    out.matrices.assign(static_cast<std::size_t>(2 * max_lag + 1), s);
    return out;
}

Panel normalized_panel(const Eigen::MatrixXd& values) {
    std::vector<std::string> ids;
    for (Index n = 0; n < values.cols(); ++n) ids.push_back("s" + std::to_string(n));
    return make_panel(values, 0, 300, ids, Eigen::VectorXd::Ones(values.cols()), true);
}

// AR(1) common factor seen with per-site lags, plus noise.
Panel factor_panel(Index T, Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::VectorXd f(T + 3);
    f[0] = d(rng);
    for (Index t = 1; t < f.size(); ++t) f[t] = 0.9 * f[t - 1] + d(rng);
    Eigen::MatrixXd x(T, n);
    for (Index t = 0; t < T; ++t)
        for (Index i = 0; i < n; ++i) x(t, i) = (1.0 - 0.1 * i) * f[t + 3 - i % 3] + 0.3 * d(rng);
    return normalized_panel(x);
}

}  // namespace

TEST(DpcaSplit, DiagonalExample) {
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(2, 2);
    s(0, 0) = 3.0;
    s(1, 1) = 1.0;
    const SpectralFactorization f = dpca_split(constant_spectrum(s, 2), 1);
    ASSERT_EQ(f.bins(), 5);
    for (Index m = 0; m < 5; ++m) {
        EXPECT_NEAR(f.eigenvalues[m][0], 3.0, 1e-14);
        EXPECT_NEAR(f.eigenvalues[m][1], 1.0, 1e-14);
        EXPECT_NEAR(std::abs(f.eigenvectors[m](0, 0) - 1.0), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(f.eigenvectors[m](1, 1) - 1.0), 0.0, 1e-14);
    }
    const CrossSpectrum common = common_part(f);
    const CrossSpectrum idio = idiosyncratic_spectrum(f);
    EXPECT_NEAR(common.matrices[0](0, 0).real(), 3.0, 1e-14);
    EXPECT_NEAR(max_abs(common.matrices[0]) , 3.0, 1e-14);
    EXPECT_NEAR(idio.matrices[0](1, 1).real(), 1.0, 1e-14);
    EXPECT_NEAR(idio.matrices[0](0, 0).real(), 0.0, 1e-14);
}

TEST(DpcaSplit, HandSolvedComplexHermitian) {
    Eigen::MatrixXcd s(2, 2);
    s << 2.0, cd(0.0, 1.0), cd(0.0, -1.0), 2.0;
    const SpectralFactorization f = dpca_split(constant_spectrum(s, 0), 1);
    EXPECT_NEAR(f.eigenvalues[0][0], 3.0, 1e-14);
    EXPECT_NEAR(f.eigenvalues[0][1], 1.0, 1e-14);
    // eigenvalue 3: (1, -j)/sqrt2 up to phase; convention makes a real positive largest entry
    const Eigen::VectorXcd v = f.eigenvectors[0].col(0);
    const double r = 1.0 / std::sqrt(2.0);
    const cd a = v[0], b = v[1];
    EXPECT_NEAR(std::abs(a), r, 1e-14);
    EXPECT_NEAR(std::abs(b), r, 1e-14);
    EXPECT_LT(std::abs(b - cd(0.0, -1.0) * a), 1e-14);
    EXPECT_LT(std::abs((s * v - 3.0 * v).norm()), 1e-13);
    const Eigen::VectorXcd w = f.eigenvectors[0].col(1);
    EXPECT_LT(std::abs(w[1] - cd(0.0, 1.0) * w[0]), 1e-14);
    // phase convention: largest-magnitude entry real and positive (first on ties)
    EXPECT_NEAR(a.imag(), 0.0, 1e-14);
    EXPECT_GT(a.real(), 0.0);
}

TEST(DpcaSplit, RandomSplitIsComplete) {
    std::mt19937_64 rng(21);
    const CrossSpectrum s = random_spectrum(4, 6, rng);
    for (Index q = 1; q <= 4; ++q) {
        const SpectralFactorization f = dpca_split(s, q);
        const CrossSpectrum chi = common_part(f);
        const CrossSpectrum xi = idiosyncratic_spectrum(f);
        for (Index m = 0; m < s.bins(); ++m) {
            const auto& sm = s.matrices[m];
            EXPECT_LT(max_abs(chi.matrices[m] + xi.matrices[m] - sm), 1e-10 * max_abs(sm));
            const Eigen::MatrixXcd& v = f.eigenvectors[m];
            EXPECT_LT(max_abs(v.adjoint() * v - Eigen::MatrixXcd::Identity(4, 4)), 1e-12);
            for (Index i = 1; i < 4; ++i) EXPECT_GE(f.eigenvalues[m][i - 1], f.eigenvalues[m][i]);
            // projector on the common subspace is idempotent
            const Eigen::MatrixXcd p = v.leftCols(q) * v.leftCols(q).adjoint();
            EXPECT_LT(max_abs(p * p - p), 1e-12);
        }
        // mirrored bins are exact conjugates
        const Index M = s.bins();
        for (Index m = 1; m < M; ++m)
            EXPECT_EQ(max_abs(f.eigenvectors[M - m] - f.eigenvectors[m].conjugate()), 0.0);
    }
}

TEST(DpcaSplit, Errors) {
    std::mt19937_64 rng(22);
    const CrossSpectrum s = random_spectrum(3, 2, rng);
    EXPECT_THROW(dpca_split(s, 0), ConfigError);
    EXPECT_THROW(dpca_split(s, 4), ConfigError);
}

TEST(SelectQ, EnergyShare) {
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(3, 3);
    s(0, 0) = 8.0;
    s(1, 1) = 1.5;
    s(2, 2) = 0.5;
    const CrossSpectrum c = constant_spectrum(s, 3);
    EXPECT_EQ(select_q(c, 0.8), 1);
    EXPECT_EQ(select_q(c, 0.9), 2);
    EXPECT_EQ(select_q(c, 0.95), 2);
    EXPECT_EQ(select_q(c, 0.96), 3);
    EXPECT_EQ(select_q(c, 1.0), 3);
    EXPECT_THROW(select_q(c, 0.0), ConfigError);
    EXPECT_THROW(select_q(c, 1.5), ConfigError);
}

TEST(ExtractFilter, LoadingIsAdjointOfFilter) {
    std::mt19937_64 rng(23);
    const SpectralFactorization f = dpca_split(random_spectrum(4, 5, rng), 2);
    const FilterBank bank = extract_filter(f);
    EXPECT_EQ(bank.factors(), 2);
    EXPECT_EQ(bank.sites(), 4);
    EXPECT_EQ(bank.bins(), 11);
    EXPECT_EQ(bank.half_bins(), 6);
    for (Index m = 0; m < bank.bins(); ++m) {
        EXPECT_EQ(max_abs(bank.loading[m] - bank.filter[m].adjoint()), 0.0);
        EXPECT_LT(max_abs(bank.filter[m] * bank.loading[m] - Eigen::MatrixXcd::Identity(2, 2)), 1e-12);
    }
}

TEST(ApplyMagnitudes, KeepsPhaseAndMirrors) {
    std::mt19937_64 rng(24);
    const FilterBank observed = extract_filter(dpca_split(random_spectrum(3, 4, rng), 1));
    const FilterTensor same = observed.magnitude(observed.half_bins());
    const FilterBank rebuilt = apply_magnitudes(observed, same);
    for (Index m = 0; m < observed.bins(); ++m) EXPECT_LT(max_abs(rebuilt.filter[m] - observed.filter[m]), 1e-12);

    const FilterTensor ones(1, 3, observed.half_bins(), 1.0);
    const FilterBank unit = apply_magnitudes(observed, ones);
    const FilterTensor phase = observed.phase();
    const Index M = unit.bins();
    for (Index m = 0; m < M; ++m)
        for (Index n = 0; n < 3; ++n) {
            EXPECT_NEAR(std::abs(unit.filter[m](0, n)), 1.0, 1e-12);
            if (m < unit.half_bins()) {
                EXPECT_NEAR(std::arg(unit.filter[m](0, n)), phase(0, n, m), 1e-12);
            }
        }
    for (Index m = 1; m < M; ++m) EXPECT_EQ(max_abs(unit.filter[M - m] - unit.filter[m].conjugate()), 0.0);
    for (Index m = 0; m < M; ++m) EXPECT_EQ(max_abs(unit.loading[m] - observed.loading[m]), 0.0);

    EXPECT_THROW(apply_magnitudes(observed, FilterTensor(1, 3, 2, 1.0)), ShapeError);
}

TEST(CommonSpectrum, ObservedBankRecoversCommonPart) {
    std::mt19937_64 rng(25);
    const CrossSpectrum s = random_spectrum(4, 5, rng);
    for (Index q : {1, 2, 4}) {
        const SpectralFactorization f = dpca_split(s, q);
        const CommonSpectrum c = common_spectrum(s, extract_filter(f));
        const CrossSpectrum chi = common_part(f);
        for (Index m = 0; m < s.bins(); ++m)
            EXPECT_LT(max_abs(c.spectrum.matrices[m] - chi.matrices[m]), 1e-10 * max_abs(s.matrices[m]));
        EXPECT_LT(c.symmetrization_delta, 1e-10);
        if (q == 4) {
            for (Index m = 0; m < s.bins(); ++m)
                EXPECT_LT(max_abs(c.spectrum.matrices[m] - s.matrices[m]), 1e-10 * max_abs(s.matrices[m]));
        }
    }
}

TEST(CommonSpectrum, ZeroBankAndShapeErrors) {
    std::mt19937_64 rng(26);
    const CrossSpectrum s = random_spectrum(3, 3, rng);
    FilterBank bank = extract_filter(dpca_split(s, 1));
    for (auto& b : bank.filter) b.setZero();
    const CommonSpectrum c = common_spectrum(s, bank);
    for (const auto& m : c.spectrum.matrices) EXPECT_EQ(max_abs(m), 0.0);

    const CrossSpectrum other = random_spectrum(3, 4, rng);
    EXPECT_THROW(common_spectrum(other, bank), ShapeError);
}

TEST(AssembleSpectrum, SumsBinwise) {
    std::mt19937_64 rng(27);
    const CrossSpectrum a = random_spectrum(3, 2, rng);
    const CrossSpectrum b = random_spectrum(3, 2, rng);
    const CrossSpectrum c = assemble_spectrum(a, b);
    for (Index m = 0; m < a.bins(); ++m) EXPECT_LT(max_abs(c.matrices[m] - a.matrices[m] - b.matrices[m]), 1e-14);
    EXPECT_THROW(assemble_spectrum(a, random_spectrum(2, 2, rng)), ShapeError);
}

TEST(SpcaReconstruct, FullRankWithSourceCovarianceIsIdentity) {
    std::mt19937_64 rng(28);
    Eigen::MatrixXd x = random_matrix(500, 3, rng);
    x.rowwise() -= x.colwise().mean();
    const Panel p = normalized_panel(x);
    const Eigen::MatrixXd cov = lag_covariance(x, 0, 1.0).at(0);
    const Panel out = spca_reconstruct(cov, p, 3);
    EXPECT_LT((out.values - x).cwiseAbs().maxCoeff(), 1e-10);
    const Panel doubled = spca_reconstruct(2.0 * cov, p, 3);
    EXPECT_LT((doubled.values - 2.0 * x).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpcaReconstruct, IdentityTargetWhitens) {
    std::mt19937_64 rng(29);
    Eigen::MatrixXd x = random_matrix(2000, 3, rng) * Eigen::Vector3d(1.0, 2.0, 3.0).asDiagonal();
    x.rowwise() -= x.colwise().mean();
    const Panel out = spca_reconstruct(Eigen::MatrixXd::Identity(3, 3), normalized_panel(x), 3);
    const Eigen::MatrixXd cov = lag_covariance(out.values, 0, 1.0).at(0);
    const Eigen::MatrixXd source = lag_covariance(x, 0, 1.0).at(0);
    EXPECT_LT((cov - source.inverse()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpcaReconstruct, RankOneKeepsLeadingDirection) {
    std::mt19937_64 rng(30);
    Eigen::MatrixXd x = random_matrix(1000, 1, rng) * Eigen::RowVector3d(1.0, 0.5, -0.5);
    x += 0.01 * random_matrix(1000, 3, rng);
    x.rowwise() -= x.colwise().mean();
    const Panel p = normalized_panel(x);
    const Eigen::MatrixXd cov = lag_covariance(x, 0, 1.0).at(0);
    const Panel out = spca_reconstruct(cov, p, 1);
    EXPECT_LT((out.values - x).cwiseAbs().maxCoeff(), 0.05);

    EXPECT_THROW(spca_reconstruct(Eigen::MatrixXd::Identity(3, 3), normalized_panel(Eigen::MatrixXd::Zero(10, 3)), 1),
                 RankError);
    EXPECT_THROW(spca_reconstruct(Eigen::MatrixXd::Identity(2, 2), p, 1), ShapeError);
    EXPECT_THROW(spca_reconstruct(cov, p, 0), ConfigError);
}

TEST(SynthesizeScenario, IdentitySamplerWithFullRankReproducesBlock) {
    std::mt19937_64 rng(31);
    const Panel block = factor_panel(2880, 4, rng);
    const ScenarioBlock out = synthesize_scenario(block, IdentitySampler{}, 53, 4, 7);
    Eigen::MatrixXd centred = block.values.rowwise() - block.values.colwise().mean();
    const Eigen::MatrixXd cov = lag_covariance(block.values, 0, 1.0).at(0);
    EXPECT_LT((out.zero_lag - cov).cwiseAbs().maxCoeff(), 1e-10 * cov.cwiseAbs().maxCoeff());
    EXPECT_LT((out.panel.values - block.values).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(out.imag_residual, 1e-10);
}

TEST(SynthesizeScenario, IdentitySamplerRankOneMatchesObservedCovariance) {
    std::mt19937_64 rng(32);
    const Panel block = factor_panel(2880, 4, rng);
    const ScenarioBlock out = synthesize_scenario(block, IdentitySampler{}, 53, 1, 7);
    const Eigen::MatrixXd cov = lag_covariance(block.values, 0, 1.0).at(0);
    EXPECT_LT((out.zero_lag - cov).cwiseAbs().maxCoeff(), 1e-10 * cov.cwiseAbs().maxCoeff());
    EXPECT_EQ(out.panel.values.rows(), 2880);
    EXPECT_EQ(out.panel.timestamps, block.timestamps);
}

TEST(SynthesizeScenario, SeedsDifferAndRepeat) {
    std::mt19937_64 rng(33);
    const Panel block = factor_panel(1000, 3, rng);
    std::vector<FilterTensor> mags;
    for (int i = 0; i < 8; ++i) {
        const Panel other = factor_panel(1000, 3, rng);
        mags.push_back(extract_filter(dpca_split(cpsd(lag_covariance(other, 20)), 1)).magnitude(21));
    }
    const BootstrapSampler sampler(mags);
    const ScenarioBlock a = synthesize_scenario(block, sampler, 20, 1, 1);
    const ScenarioBlock b = synthesize_scenario(block, sampler, 20, 1, 1);
    EXPECT_EQ((a.panel.values - b.panel.values).cwiseAbs().maxCoeff(), 0.0);
    bool differs = false;
    for (std::uint64_t s = 2; s < 10 && !differs; ++s)
        differs = (synthesize_scenario(block, sampler, 20, 1, s).panel.values - a.panel.values).cwiseAbs().maxCoeff() > 1e-9;
    EXPECT_TRUE(differs);
    EXPECT_THROW(BootstrapSampler(std::vector<FilterTensor>{}), ConfigError);
}

TEST(SynthesizeScenario, SingleSite) {
    std::mt19937_64 rng(34);
    Eigen::MatrixXd x = random_matrix(600, 1, rng);
    const Panel block = normalized_panel(x);
    const ScenarioBlock out = synthesize_scenario(block, IdentitySampler{}, 10, 1, 3);
    EXPECT_LT((out.panel.values - block.values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(FilterBankIo, RoundTrip) {
    std::mt19937_64 rng(35);
    std::vector<FilterBank> banks;
    for (int i = 0; i < 3; ++i) banks.push_back(extract_filter(dpca_split(random_spectrum(3, 4, rng), 2)));
    const auto path = testing_helpers::temp_path("banks.bin");
    write_filter_banks(path, banks);
    const auto back = read_filter_banks(path);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        // stored as magnitude and phase, so the rebuild is exact only to rounding
        EXPECT_EQ(back[i].dt, banks[i].dt);
        for (Index m = 0; m < banks[i].bins(); ++m) {
            EXPECT_LT(max_abs(back[i].filter[m] - banks[i].filter[m]), 1e-15);
            EXPECT_LT(max_abs(back[i].loading[m] - banks[i].loading[m]), 1e-15);
        }
    }
    EXPECT_THROW(write_filter_banks(path, std::vector<FilterBank>{}), ShapeError);
    EXPECT_THROW(read_filter_banks(testing_helpers::temp_path("missing.bin")), IoError);
}

TEST(Determinism, SplitIsBitReproducible) {
    std::mt19937_64 a(36), b(36);
    const SpectralFactorization fa = dpca_split(random_spectrum(4, 6, a), 2);
    const SpectralFactorization fb = dpca_split(random_spectrum(4, 6, b), 2);
    for (Index m = 0; m < fa.bins(); ++m) {
        EXPECT_EQ(max_abs(fa.eigenvectors[m] - fb.eigenvectors[m]), 0.0);
        EXPECT_EQ((fa.eigenvalues[m] - fb.eigenvalues[m]).cwiseAbs().maxCoeff(), 0.0);
    }
}
