#include "endnet/types.hpp"

#include <cmath>
#include <string>

namespace endnet {

HyperCube::HyperCube(Index height, Index width, Eigen::MatrixXd pixels,
                     std::vector<double> band_wavelengths)
    : height_(height), width_(width), pixels_(std::move(pixels)),
      wavelengths_(std::move(band_wavelengths)) {
    if (height_ < 0 || width_ < 0 || height_ * width_ != pixels_.cols())
        throw Error(ErrorCode::SizeMismatch,
                    "cube is " + std::to_string(height_) + "x" + std::to_string(width_) +
                        " but holds " + std::to_string(pixels_.cols()) + " pixels");
    if (!pixels_.allFinite())
        throw Error(ErrorCode::NonFiniteValue, "cube contains NaN or Inf");
    if (!wavelengths_.empty() && static_cast<Index>(wavelengths_.size()) != pixels_.rows())
        throw Error(ErrorCode::SizeMismatch, "wavelength count does not match band count");
}

SpectraMatrix::SpectraMatrix(Eigen::MatrixXd signatures) : signatures_(std::move(signatures)) {
    if (signatures_.cols() < 1)
        throw Error(ErrorCode::SizeMismatch, "spectra matrix needs at least one signature");
    if (!signatures_.allFinite())
        throw Error(ErrorCode::NonFiniteValue, "spectra contain NaN or Inf");
}

bool satisfies_simplex_constraints(const AbundanceMap& map, double tol) {
    if (map.fractions.size() == 0) return true;
    if ((map.fractions.array() < -tol).any()) return false;
    const Eigen::RowVectorXd sums = map.fractions.colwise().sum();
    return ((sums.array() - 1.0).abs() <= tol).all();
}

} // namespace endnet
