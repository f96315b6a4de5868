#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <random>
#include <string>

namespace endnet::testing {

inline Eigen::MatrixXd uniform_matrix(Eigen::Index r, Eigen::Index c, double lo, double hi,
                                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

// Uniform point on the probability simplex.
inline Eigen::VectorXd simplex_point(Eigen::Index k, std::mt19937_64& rng) {
    std::exponential_distribution<double> e(1.0);
    Eigen::VectorXd a(k);
    for (Eigen::Index i = 0; i < k; ++i) a(i) = e(rng);
    return a / a.sum();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("endnet_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace endnet::testing
