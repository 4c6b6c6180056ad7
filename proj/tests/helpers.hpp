#pragma once

#include <complex>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "gdfmgan/spectral.hpp"

namespace testing_helpers {

inline std::string temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "gdfmgan_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

inline Eigen::MatrixXcd random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {d(rng), d(rng)};
    return 0.5 * (a + a.adjoint());
}

inline Eigen::MatrixXcd random_psd(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = {d(rng), d(rng)};
    return a * a.adjoint();
}

/// Conjugate-symmetric grid of Hermitian PSD matrices built from a random
/// real lag sequence (so the inverse transform is real).
inline gdfmgan::CrossSpectrum random_spectrum(Eigen::Index n, Eigen::Index max_lag, std::mt19937_64& rng) {
    gdfmgan::LagCovSeq seq;
    seq.max_lag = max_lag;
    seq.dt = 1.0;
    Eigen::MatrixXd x = random_matrix(40 * (max_lag + 1) + 8 * n, n, rng);
    return gdfmgan::cpsd(gdfmgan::lag_covariance(x, max_lag, 1.0));
}

inline double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing_helpers
