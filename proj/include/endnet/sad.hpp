#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "endnet/error.hpp"

namespace endnet {

// Cosine, spectral angle and normalized similarity of a pair of spectra.
template <typename Scalar>
struct SadScore {
    Scalar theta = 0;  // cosine after clamping to [-1 + clip, 1 - clip]
    Scalar angle = 0;  // arccos(theta), in [0, pi]
    Scalar similarity = 0;  // 1 - angle / pi, in [0, 1]
    Scalar x_norm = 0;
    Scalar w_norm = 0;
    Scalar dot = 0;
    bool clamped = false;
};

template <typename DerivedX, typename DerivedW>
SadScore<typename DerivedX::Scalar> sad_similarity(const Eigen::MatrixBase<DerivedX>& x,
                                                   const Eigen::MatrixBase<DerivedW>& w,
                                                   typename DerivedX::Scalar theta_clip) {
    using Scalar = typename DerivedX::Scalar;
    SadScore<Scalar> r;
    r.x_norm = x.norm();
    r.w_norm = w.norm();
    if (!(r.x_norm > 0) || !(r.w_norm > 0))
        throw Error(ErrorCode::DegenerateData, "spectral angle of a zero-norm vector");
    r.dot = x.dot(w);
    const Scalar raw = r.dot / (r.x_norm * r.w_norm);
    const Scalar hi = Scalar(1) - theta_clip;
    const Scalar lo = Scalar(-1) + theta_clip;
    r.clamped = raw >= hi || raw <= lo;
    r.theta = std::clamp(raw, lo, hi);
    r.angle = std::acos(r.theta);
    r.similarity = Scalar(1) - r.angle / std::numbers::pi_v<Scalar>;
    return r;
}

// dC/dw for C = 1 - arccos(theta(x, w)) / pi, chained as
// (dC/dS)(dS/dtheta)(dtheta/dw). Zero when theta sits on the clamp.
template <typename DerivedX, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1>
sad_similarity_grad(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedW>& w,
                    const SadScore<typename DerivedX::Scalar>& score) {
    using Scalar = typename DerivedX::Scalar;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    if (score.clamped) return Vec::Zero(w.size());
    const Scalar dc_ds = Scalar(-1) / std::numbers::pi_v<Scalar>;
    const Scalar ds_dtheta = Scalar(-1) / std::sqrt(Scalar(1) - score.theta * score.theta);
    const Scalar wn = score.w_norm, xn = score.x_norm;
    return (dc_ds * ds_dtheta) *
           (x / (wn * xn) - w * (score.dot / (wn * wn * wn * xn)));
}

// dtheta/dw alone, exposed for the orthogonality identity <dtheta/dw, w> = 0.
template <typename DerivedX, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1>
cosine_grad(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedW>& w) {
    using Scalar = typename DerivedX::Scalar;
    const Scalar wn = w.norm(), xn = x.norm();
    return x / (wn * xn) - w * (x.dot(w) / (wn * wn * wn * xn));
}

// Spectral angle in radians without clamping margin; used for evaluation.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar spectral_angle(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    const Scalar na = a.norm(), nb = b.norm();
    if (!(na > 0) || !(nb > 0))
        throw Error(ErrorCode::DegenerateData, "spectral angle of a zero-norm vector");
    return std::acos(std::clamp(a.dot(b) / (na * nb), Scalar(-1), Scalar(1)));
}

} // namespace endnet
