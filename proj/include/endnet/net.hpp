#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "endnet/layers.hpp"
#include "endnet/sad.hpp"

namespace endnet {

struct HyperParams {
    double lambda0 = 0.01;  // Euclidean reconstruction
    double lambda1 = 10.0;  // -log C(x, x_hat)
    double lambda2 = 0.1;   // l1 sparsity on z
    double lambda3 = 1e-5;  // |W_enc|_F^2
    double lambda4 = 1e-5;  // |W_dec|_F^2
    double lambda5 = 1e-3;  // |rho|^2
    double dropout_p = 1.0;  // keep probability
    Eigen::Index top_n = 2;
    double eps = 1e-8;
    double theta_clip = 1e-7;
};

void validate(const HyperParams& hyper, Eigen::Index k);

// Encoder filters, shift, running statistics and decoder. There are no bias
// vectors; the decoder columns are the endmember estimates.
template <typename Scalar = double>
struct EndNetModel {
    MatrixX<Scalar> w_enc;  // K x D
    VectorX<Scalar> rho;    // K
    MatrixX<Scalar> w_dec;  // D x K
    RunningStats<Scalar> stats;

    Eigen::Index bands() const { return w_dec.rows(); }
    Eigen::Index k() const { return w_dec.cols(); }
    Eigen::Index trainable_count() const { return w_enc.size() + rho.size() + w_dec.size(); }

    // Encoder rows and decoder columns both start from the given D x K
    // endmember estimate; rho starts at zero.
    static EndNetModel from_endmembers(const MatrixX<Scalar>& endmembers) {
        EndNetModel m;
        m.w_dec = endmembers;
        m.w_enc = endmembers.transpose();
        m.rho = VectorX<Scalar>::Zero(endmembers.cols());
        m.stats.mean = VectorX<Scalar>::Zero(endmembers.cols());
        m.stats.var = VectorX<Scalar>::Ones(endmembers.cols());
        return m;
    }

    template <typename Other>
    EndNetModel<Other> cast() const {
        EndNetModel<Other> m;
        m.w_enc = w_enc.template cast<Other>();
        m.rho = rho.template cast<Other>();
        m.w_dec = w_dec.template cast<Other>();
        m.stats.mean = stats.mean.template cast<Other>();
        m.stats.var = stats.var.template cast<Other>();
        m.stats.initialized = stats.initialized;
        return m;
    }
};

using Model = EndNetModel<double>;

// Intermediates of a batch forward pass (samples are columns).
template <typename Scalar>
struct ForwardTrace {
    Mode mode = Mode::Infer;
    MatrixX<Scalar> input;                  // D x N, encoder input
    std::vector<SadScore<Scalar>> scores;   // K x N, index k + K * n
    MatrixX<Scalar> h;                      // K x N similarities C(x, w_k)
    BatchNormCache<Scalar> bn;
    MatrixX<Scalar> bn_out;                 // K x N
    MatrixX<Scalar> dropout_mask;           // K x N, entries in {0, 1/p}
    std::vector<ActivationTrace<Scalar>> act;  // per sample
    MatrixX<Scalar> z;                      // K x N
    MatrixX<Scalar> y;                      // K x N
    MatrixX<Scalar> x_hat;                  // D x N
    VectorX<Scalar> recon_similarity;       // C(input, x_hat), 0 for a dead x_hat

    Eigen::Index batch() const { return input.cols(); }
    const SadScore<Scalar>& score(Eigen::Index k, Eigen::Index n) const {
        return scores[static_cast<std::size_t>(k + h.rows() * n)];
    }
};

// Inverted dropout: each entry is 1/p with probability p, else 0.
template <typename Scalar>
MatrixX<Scalar> draw_dropout_mask(Eigen::Index k, Eigen::Index n, double keep_p,
                                  std::mt19937_64& rng) {
    if (keep_p >= 1.0) return MatrixX<Scalar>::Ones(k, n);
    std::bernoulli_distribution keep(keep_p);
    MatrixX<Scalar> r(k, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < k; ++i)
            r(i, j) = keep(rng) ? Scalar(1.0 / keep_p) : Scalar(0);
    return r;
}

// Forward pass with an explicit dropout mask (ignored in infer mode, where
// the mask is all ones). A null mask means no dropout.
template <typename Scalar>
ForwardTrace<Scalar> forward(const EndNetModel<Scalar>& model, const MatrixX<Scalar>& inputs,
                             const HyperParams& hyper, Mode mode,
                             const MatrixX<Scalar>* dropout_mask = nullptr) {
    const Eigen::Index k = model.k(), n = inputs.cols();
    if (inputs.rows() != model.bands())
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(inputs.rows()) +
                                                      " bands, model expects " +
                                                      std::to_string(model.bands()));
    const auto clip = static_cast<Scalar>(hyper.theta_clip);
    const auto eps = static_cast<Scalar>(hyper.eps);

    ForwardTrace<Scalar> t;
    t.mode = mode;
    t.input = inputs;
    t.scores.resize(static_cast<std::size_t>(k * n));
    t.h.resize(k, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < k; ++i) {
            auto s = sad_similarity(inputs.col(j), model.w_enc.row(i).transpose(), clip);
            t.h(i, j) = s.similarity;
            t.scores[static_cast<std::size_t>(i + k * j)] = s;
        }

    t.bn_out = batchnorm_forward<Scalar>(t.h, model.rho, eps, mode, model.stats, t.bn);
    if (mode == Mode::Train && dropout_mask) {
        if (dropout_mask->rows() != k || dropout_mask->cols() != n)
            throw Error(ErrorCode::DimensionMismatch, "dropout mask shape");
        t.dropout_mask = *dropout_mask;
    } else {
        t.dropout_mask = MatrixX<Scalar>::Ones(k, n);
    }

    t.act.reserve(static_cast<std::size_t>(n));
    t.z.resize(k, n);
    t.y.resize(k, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        t.act.push_back(relu_topn_l1<Scalar>(t.bn_out.col(j), t.dropout_mask.col(j), hyper.top_n));
        t.z.col(j) = t.act.back().z;
        t.y.col(j) = t.act.back().y;
    }
    t.x_hat = model.w_dec * t.y;
    t.recon_similarity.resize(n);
    for (Eigen::Index j = 0; j < n; ++j)
        t.recon_similarity(j) = t.x_hat.col(j).norm() > Scalar(0)
                                    ? sad_similarity(inputs.col(j), t.x_hat.col(j), clip).similarity
                                    : Scalar(0);
    return t;
}

template <typename Scalar>
ForwardTrace<Scalar> forward(const EndNetModel<Scalar>& model, const MatrixX<Scalar>& inputs,
                             const HyperParams& hyper, Mode mode, std::mt19937_64& rng) {
    if (mode == Mode::Train && hyper.dropout_p < 1.0) {
        const MatrixX<Scalar> mask = draw_dropout_mask<Scalar>(model.k(), inputs.cols(), hyper.dropout_p, rng);
        return forward(model, inputs, hyper, mode, &mask);
    }
    return forward(model, inputs, hyper, mode);
}

template <typename Scalar>
struct ModelGrads {
    MatrixX<Scalar> w_enc;
    VectorX<Scalar> rho;
    MatrixX<Scalar> w_dec;
};

template <typename Scalar>
struct LossResult {
    Scalar value = 0;
    // Batch-mean data terms and the regularizer total.
    Scalar reconstruction = 0;
    Scalar kl = 0;
    Scalar sparsity = 0;
    Scalar regularization = 0;
    ModelGrads<Scalar> grads;
};

// Composite objective, averaged over the batch:
//   lambda0/2 |x - x_hat|^2 + lambda1 * (-log(C(x, x_hat) + eps)) + lambda2 |z|_1
// plus lambda3 |W_enc|^2 + lambda4 |W_dec|^2 + lambda5 |rho|^2 once per batch.
// `targets` are the clean samples; the trace may come from corrupted inputs.
template <typename Scalar>
LossResult<Scalar> loss(const ForwardTrace<Scalar>& trace, const EndNetModel<Scalar>& model,
                        const HyperParams& hyper, const MatrixX<Scalar>& targets) {
    const Eigen::Index k = model.k(), d = model.bands(), n = trace.batch();
    if (targets.rows() != d || targets.cols() != n)
        throw Error(ErrorCode::DimensionMismatch, "loss targets do not match the trace");
    const auto eps = static_cast<Scalar>(hyper.eps);
    const auto clip = static_cast<Scalar>(hyper.theta_clip);
    const auto l0 = static_cast<Scalar>(hyper.lambda0), l1 = static_cast<Scalar>(hyper.lambda1),
               l2 = static_cast<Scalar>(hyper.lambda2), l3 = static_cast<Scalar>(hyper.lambda3),
               l4 = static_cast<Scalar>(hyper.lambda4), l5 = static_cast<Scalar>(hyper.lambda5);
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);

    LossResult<Scalar> r;
    r.grads.w_dec = 2 * l4 * model.w_dec;
    r.grads.w_enc = 2 * l3 * model.w_enc;
    MatrixX<Scalar> d_bn(k, n);

    for (Eigen::Index j = 0; j < n; ++j) {
        const auto x = targets.col(j);
        const auto x_hat = trace.x_hat.col(j);
        const auto& act = trace.act[static_cast<std::size_t>(j)];

        const VectorX<Scalar> diff = x_hat - x;
        r.reconstruction += Scalar(0.5) * diff.squaredNorm() * inv_n;
        VectorX<Scalar> d_xhat = (l0 * inv_n) * diff;

        Scalar c = 0;
        if (x_hat.norm() > Scalar(0)) {
            const auto s = sad_similarity(x, x_hat, clip);
            c = s.similarity;
            d_xhat += (-l1 * inv_n / (c + eps)) * sad_similarity_grad(x, x_hat, s);
        }
        r.kl += -std::log(c + eps) * inv_n;
        r.sparsity += act.z.template lpNorm<1>() * inv_n;

        r.grads.w_dec += d_xhat * trace.y.col(j).transpose();
        const VectorX<Scalar> d_y = model.w_dec.transpose() * d_xhat;
        const VectorX<Scalar> d_zstar = l1norm_backward<Scalar>(d_y, act);
        VectorX<Scalar> d_z = act.topn_mask.select(d_zstar, Scalar(0));
        d_z += (act.z.array() > Scalar(0)).template cast<Scalar>().matrix() * (l2 * inv_n);
        const VectorX<Scalar> d_relu = trace.dropout_mask.col(j).cwiseProduct(d_z);
        d_bn.col(j) = act.relu_mask.select(d_relu, Scalar(0));
    }

    const auto bn = batchnorm_backward<Scalar>(d_bn, trace.bn);
    r.grads.rho = bn.d_rho + 2 * l5 * model.rho;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < k; ++i) {
            const Scalar g = bn.d_input(i, j);
            if (g == Scalar(0)) continue;
            r.grads.w_enc.row(i) +=
                g * sad_similarity_grad(trace.input.col(j), model.w_enc.row(i).transpose(), trace.score(i, j))
                        .transpose();
        }

    r.regularization = l3 * model.w_enc.squaredNorm() + l4 * model.w_dec.squaredNorm() +
                       l5 * model.rho.squaredNorm();
    r.value = l0 * r.reconstruction + l1 * r.kl + l2 * r.sparsity + r.regularization;
    if (!std::isfinite(static_cast<double>(r.value)))
        throw Error(ErrorCode::NumericalDivergence, "loss is not finite");
    return r;
}

// Binary checkpoint: "ENDN", u32 version 1, u32 D, u32 K, then little-endian
// f64 arrays w_enc (K*D row-major), rho, run_mean, run_var, w_dec (D*K row-major).
std::string checkpoint_bytes(const Model& model);
Model model_from_checkpoint_bytes(const std::string& bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

} // namespace endnet
