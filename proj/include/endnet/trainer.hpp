#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "endnet/init.hpp"
#include "endnet/net.hpp"

namespace endnet {

struct TrainConfig {
    long iters = 20000;
    double lr = 0.001;
    Index batch_size = 64;
    double beta1 = 0.7;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    HyperParams hyper;
    double corrupt_mask_frac = 0.4;  // at most this fraction of bands is perturbed
    double corrupt_sigma = -1.0;     // negative: 0.1 * global std of the cube
    std::uint64_t seed = 0;
    long log_every = 100;
};

void validate(const TrainConfig& cfg, Index k);

struct TrainLogEntry {
    long iter = 0;
    double loss = 0;
    double z_l1 = 0;
    double recon_sad = 0;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
    std::string to_csv() const;  // "iter,loss,z_l1,recon_sad"
};

// Denoising corruption: m ~ U{0..floor(frac * D)} distinct bands receive
// additive N(0, sigma^2) noise; the rest are copied.
Eigen::VectorXd corrupt(const Eigen::VectorXd& x, double mask_frac, double sigma, std::mt19937_64& rng);

// Bias-corrected Adam update of one parameter block at step t >= 1.
template <typename DP, typename DG, typename DM, typename DV>
void adam_update(Eigen::MatrixBase<DP>& param, const Eigen::MatrixBase<DG>& grad,
                 Eigen::MatrixBase<DM>& m1, Eigen::MatrixBase<DV>& m2, double lr, double beta1,
                 double beta2, double eps, long t) {
    m1 = beta1 * m1 + (1.0 - beta1) * grad;
    m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    param -= (lr * (m1 / c1).array() / ((m2 / c2).array().sqrt() + eps)).matrix();
}

struct AdamState {
    ModelGrads<double> m1;
    ModelGrads<double> m2;
    long t = 0;

    static AdamState zeros_like(const Model& model);
};

// Increments state.t and updates w_enc, rho and w_dec in place. Throws
// NumericalDivergence on non-finite gradients.
void adam_step(Model& model, const ModelGrads<double>& grads, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct TrainResult {
    Model model;
    TrainLog log;
};

TrainResult train(const HyperCube& cube, const InitResult& init, const TrainConfig& cfg);

// Mean |z|_1 over every nonzero pixel in infer mode.
double mean_activation_l1(const Model& model, const HyperCube& cube, const HyperParams& hyper);

} // namespace endnet
