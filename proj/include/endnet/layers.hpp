#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "endnet/error.hpp"

namespace endnet {

enum class Mode { Train, Infer };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---- shift-only batch normalization ----------------------------------------
//
// Responses are laid out K x N (one column per sample). There is no scale
// parameter: out = (h - mean) / sqrt(var + eps) + rho.

template <typename Scalar>
struct BatchNormCache {
    Mode mode = Mode::Train;
    MatrixX<Scalar> normalized;  // (h - mean) * inv_std, before the shift
    VectorX<Scalar> mean;
    VectorX<Scalar> var;  // biased (1/N) batch variance, or the running value
    VectorX<Scalar> inv_std;
};

template <typename Scalar>
struct RunningStats {
    VectorX<Scalar> mean;
    VectorX<Scalar> var;
    bool initialized = false;
};

template <typename Scalar>
MatrixX<Scalar> batchnorm_forward(const MatrixX<Scalar>& h, const VectorX<Scalar>& rho,
                                  Scalar eps, Mode mode, const RunningStats<Scalar>& stats,
                                  BatchNormCache<Scalar>& cache) {
    const Eigen::Index n = h.cols();
    cache.mode = mode;
    if (mode == Mode::Train) {
        if (n < 2)
            throw Error(ErrorCode::Config, "batch normalization in train mode needs N >= 2");
        cache.mean = h.rowwise().mean();
        const MatrixX<Scalar> centered = h.colwise() - cache.mean;
        cache.var = centered.array().square().rowwise().sum() / static_cast<Scalar>(n);
        cache.inv_std = (cache.var.array() + eps).rsqrt();
        cache.normalized = centered.array().colwise() * cache.inv_std.array();
    } else {
        cache.mean = stats.mean;
        cache.var = stats.var;
        cache.inv_std = (stats.var.array() + eps).rsqrt();
        cache.normalized = (h.colwise() - stats.mean).array().colwise() * cache.inv_std.array();
    }
    return cache.normalized.colwise() + rho;
}

// Exponential moving average; the first call copies the batch statistics.
template <typename Scalar>
void update_running_stats(RunningStats<Scalar>& stats, const BatchNormCache<Scalar>& cache,
                          Scalar momentum = Scalar(0.9)) {
    if (!stats.initialized) {
        stats.mean = cache.mean;
        stats.var = cache.var;
        stats.initialized = true;
        return;
    }
    stats.mean = momentum * stats.mean + (Scalar(1) - momentum) * cache.mean;
    stats.var = momentum * stats.var + (Scalar(1) - momentum) * cache.var;
}

template <typename Scalar>
struct BatchNormGrads {
    MatrixX<Scalar> d_input;
    VectorX<Scalar> d_rho;
};

// Train mode accounts for the dependence of mean and variance on every
// sample in the batch; infer mode is a fixed affine map.
template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const MatrixX<Scalar>& d_out,
                                          const BatchNormCache<Scalar>& cache) {
    BatchNormGrads<Scalar> g;
    g.d_rho = d_out.rowwise().sum();
    if (cache.mode == Mode::Infer) {
        g.d_input = d_out.array().colwise() * cache.inv_std.array();
        return g;
    }
    const auto n = static_cast<Scalar>(d_out.cols());
    const VectorX<Scalar> sum_g = g.d_rho;
    const VectorX<Scalar> sum_gx = (d_out.array() * cache.normalized.array()).rowwise().sum();
    MatrixX<Scalar> t = (n * d_out).colwise() - sum_g;
    t -= (cache.normalized.array().colwise() * sum_gx.array()).matrix();
    g.d_input = t.array().colwise() * (cache.inv_std.array() / n);
    return g;
}

// ---- ReLU, dropout, top-n selection, l1 normalization -----------------------

template <typename Scalar>
struct ActivationTrace {
    VectorX<Scalar> relu_out;
    VectorX<Scalar> z;       // dropout_mask * relu_out
    VectorX<Scalar> z_star;  // top-n entries of z, zeros elsewhere
    VectorX<Scalar> y;       // z_star / |z_star|_1, zero when z_star is
    Eigen::Array<bool, Eigen::Dynamic, 1> relu_mask;
    Eigen::Array<bool, Eigen::Dynamic, 1> topn_mask;
    Scalar z_star_l1 = 0;
};

// Indices of the `n` largest entries, ties resolved toward the lower index.
template <typename Derived>
std::vector<Eigen::Index> top_indices(const Eigen::MatrixBase<Derived>& v, Eigen::Index n) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) > v(b); });
    idx.resize(static_cast<std::size_t>(std::min<Eigen::Index>(n, v.size())));
    return idx;
}

template <typename Scalar>
ActivationTrace<Scalar> relu_topn_l1(const VectorX<Scalar>& z_pre, const VectorX<Scalar>& dropout_mask,
                                     Eigen::Index top_n) {
    ActivationTrace<Scalar> t;
    const Eigen::Index k = z_pre.size();
    t.relu_mask = z_pre.array() > Scalar(0);
    t.relu_out = t.relu_mask.select(z_pre, Scalar(0));
    t.z = dropout_mask.cwiseProduct(t.relu_out);
    t.z_star = VectorX<Scalar>::Zero(k);
    t.topn_mask = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(k, false);
    for (Eigen::Index i : top_indices(t.z, top_n)) {
        if (t.z(i) > Scalar(0)) {
            t.z_star(i) = t.z(i);
            t.topn_mask(i) = true;
        }
    }
    t.z_star_l1 = t.z_star.template lpNorm<1>();
    // Exact normalization keeps |y|_1 = 1 for arbitrarily small activations.
    t.y = t.z_star_l1 > Scalar(0) ? VectorX<Scalar>(t.z_star / t.z_star_l1) : VectorX<Scalar>::Zero(k);
    return t;
}

// Gradient through y = z* / |z*|_1:
//   dL/dz*_j = (dL/dy_j - sign(z*_j) <dL/dy, y>) / |z*|_1,
// with zero gradient wherever z*_j = 0.
template <typename Scalar>
VectorX<Scalar> l1norm_backward(const VectorX<Scalar>& d_y, const ActivationTrace<Scalar>& t) {
    VectorX<Scalar> g = VectorX<Scalar>::Zero(d_y.size());
    if (!(t.z_star_l1 > Scalar(0))) return g;
    const Scalar gy = d_y.dot(t.y);
    for (Eigen::Index j = 0; j < d_y.size(); ++j)
        if (t.z_star(j) != Scalar(0))
            g(j) = (d_y(j) - (t.z_star(j) > 0 ? gy : -gy)) / t.z_star_l1;
    return g;
}

} // namespace endnet
