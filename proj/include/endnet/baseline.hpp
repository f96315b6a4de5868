#pragma once

// Conventional sigmoid autoencoder with biases, kept as a reference point for
// comparing against the bias-free model (e.g. to show the bias term acting as
// an extra endmember).

#include <Eigen/Dense>

#include <random>

#include "endnet/layers.hpp"

namespace endnet {

template <typename Scalar = double>
struct BaselineAutoencoder {
    MatrixX<Scalar> w_enc;  // K x D
    VectorX<Scalar> b_enc;  // K
    MatrixX<Scalar> w_dec;  // D x K
    VectorX<Scalar> b_dec;  // D

    static BaselineAutoencoder random(Eigen::Index d, Eigen::Index k, std::mt19937_64& rng,
                                      Scalar scale = Scalar(0.1)) {
        std::normal_distribution<double> g(0.0, 1.0);
        auto draw = [&](Eigen::Index r, Eigen::Index c) {
            MatrixX<Scalar> m(r, c);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * Scalar(g(rng));
            return m;
        };
        BaselineAutoencoder a;
        a.w_enc = draw(k, d);
        a.b_enc = VectorX<Scalar>::Zero(k);
        a.w_dec = draw(d, k);
        a.b_dec = VectorX<Scalar>::Zero(d);
        return a;
    }
};

template <typename Scalar>
struct BaselineResult {
    Scalar value = 0;
    MatrixX<Scalar> y;      // K x N
    MatrixX<Scalar> x_hat;  // D x N
    BaselineAutoencoder<Scalar> grads;
};

// y = sigmoid(W_e x + b_e), x_hat = sigmoid(W_d y + b_d),
// L = mean over samples of 1/2 |x - x_hat|^2.
template <typename Scalar>
BaselineResult<Scalar> baseline_loss(const BaselineAutoencoder<Scalar>& net, const MatrixX<Scalar>& x) {
    auto sigmoid = [](const auto& a) { return (Scalar(1) + (-a.array()).exp()).inverse().matrix(); };
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(x.cols());
    BaselineResult<Scalar> r;
    r.y = sigmoid((net.w_enc * x).colwise() + net.b_enc);
    r.x_hat = sigmoid((net.w_dec * r.y).colwise() + net.b_dec);
    const MatrixX<Scalar> diff = r.x_hat - x;
    r.value = Scalar(0.5) * diff.squaredNorm() * inv_n;

    const MatrixX<Scalar> d_out = (diff.array() * r.x_hat.array() * (Scalar(1) - r.x_hat.array())).matrix() * inv_n;
    r.grads.w_dec = d_out * r.y.transpose();
    r.grads.b_dec = d_out.rowwise().sum();
    const MatrixX<Scalar> d_hidden =
        ((net.w_dec.transpose() * d_out).array() * r.y.array() * (Scalar(1) - r.y.array())).matrix();
    r.grads.w_enc = d_hidden * x.transpose();
    r.grads.b_enc = d_hidden.rowwise().sum();
    return r;
}

} // namespace endnet
