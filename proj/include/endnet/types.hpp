#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

#include "endnet/error.hpp"

namespace endnet {

using Index = Eigen::Index;

// H x W x D reflectance cube. Pixels are stored as the columns of a D x N
// column-major matrix, so pixel p = row * width + col occupies the contiguous
// range [p * D, (p + 1) * D) of the underlying buffer.
class HyperCube {
public:
    HyperCube() = default;
    HyperCube(Index height, Index width, Eigen::MatrixXd pixels,
              std::vector<double> band_wavelengths = {});

    Index height() const { return height_; }
    Index width() const { return width_; }
    Index bands() const { return pixels_.rows(); }
    Index pixel_count() const { return pixels_.cols(); }

    const Eigen::MatrixXd& pixels() const { return pixels_; }
    auto pixel(Index p) const { return pixels_.col(p); }
    auto pixel(Index row, Index col) const { return pixels_.col(row * width_ + col); }

    const std::vector<double>& band_wavelengths() const { return wavelengths_; }

private:
    Index height_ = 0;
    Index width_ = 0;
    Eigen::MatrixXd pixels_;
    std::vector<double> wavelengths_;
};

// K spectra of D bands, stored one signature per column (D x K), which is
// also the layout of the decoder weights.
class SpectraMatrix {
public:
    SpectraMatrix() = default;
    explicit SpectraMatrix(Eigen::MatrixXd signatures);

    Index count() const { return signatures_.cols(); }
    Index bands() const { return signatures_.rows(); }
    const Eigen::MatrixXd& signatures() const { return signatures_; }
    auto signature(Index k) const { return signatures_.col(k); }

private:
    Eigen::MatrixXd signatures_;
};

// Per-pixel fractions, stored K x N (one column per pixel).
struct AbundanceMap {
    Index height = 0;
    Index width = 0;
    Eigen::MatrixXd fractions;

    Index k() const { return fractions.rows(); }
    Index pixel_count() const { return fractions.cols(); }
};

// True when every fraction is >= -tol and every pixel sums to one within tol.
bool satisfies_simplex_constraints(const AbundanceMap& map, double tol = 1e-6);

} // namespace endnet
