#include "endnet/trainer.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace endnet {

void validate(const TrainConfig& cfg, Index k) {
    validate(cfg.hyper, k);
    if (cfg.iters < 0) throw Error(ErrorCode::Config, "iteration count must be non-negative");
    if (!(cfg.lr > 0)) throw Error(ErrorCode::Config, "learning rate must be positive");
    if (cfg.batch_size < 2) throw Error(ErrorCode::Config, "batch size must be >= 2 for batch normalization");
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1)) throw Error(ErrorCode::Config, "beta1 must lie in [0, 1)");
    if (!(cfg.beta2 >= 0 && cfg.beta2 < 1)) throw Error(ErrorCode::Config, "beta2 must lie in [0, 1)");
    if (!(cfg.adam_eps > 0)) throw Error(ErrorCode::Config, "adam eps must be positive");
    if (!(cfg.corrupt_mask_frac >= 0 && cfg.corrupt_mask_frac <= 1))
        throw Error(ErrorCode::Config, "mask fraction must lie in [0, 1]");
    if (cfg.log_every < 1) throw Error(ErrorCode::Config, "log interval must be positive");
}

std::string TrainLog::to_csv() const {
    std::string out = "iter,loss,z_l1,recon_sad\n";
    char line[128];
    for (const auto& e : entries) {
        std::snprintf(line, sizeof(line), "%ld,%.10g,%.10g,%.10g\n", e.iter, e.loss, e.z_l1, e.recon_sad);
        out += line;
    }
    return out;
}

Eigen::VectorXd corrupt(const Eigen::VectorXd& x, double mask_frac, double sigma, std::mt19937_64& rng) {
    Eigen::VectorXd out = x;
    const Index d = x.size();
    const auto max_masked = static_cast<Index>(std::floor(mask_frac * static_cast<double>(d) + 1e-9));
    if (max_masked == 0) return out;
    const Index m = std::uniform_int_distribution<Index>(0, max_masked)(rng);
    std::vector<Index> bands(static_cast<std::size_t>(d));
    std::iota(bands.begin(), bands.end(), Index{0});
    std::normal_distribution<double> noise(0.0, 1.0);
    // Partial Fisher-Yates: the first m entries become the masked bands.
    for (Index i = 0; i < m; ++i) {
        const Index j = std::uniform_int_distribution<Index>(i, d - 1)(rng);
        std::swap(bands[static_cast<std::size_t>(i)], bands[static_cast<std::size_t>(j)]);
        out(bands[static_cast<std::size_t>(i)]) += sigma * noise(rng);
    }
    return out;
}

AdamState AdamState::zeros_like(const Model& model) {
    AdamState s;
    for (auto* g : {&s.m1, &s.m2}) {
        g->w_enc = Eigen::MatrixXd::Zero(model.w_enc.rows(), model.w_enc.cols());
        g->rho = Eigen::VectorXd::Zero(model.rho.size());
        g->w_dec = Eigen::MatrixXd::Zero(model.w_dec.rows(), model.w_dec.cols());
    }
    return s;
}

void adam_step(Model& model, const ModelGrads<double>& g, AdamState& s, double lr, double beta1,
               double beta2, double eps) {
    if (!g.w_enc.allFinite() || !g.rho.allFinite() || !g.w_dec.allFinite())
        throw Error(ErrorCode::NumericalDivergence, "non-finite gradient");
    ++s.t;
    adam_update(model.w_enc, g.w_enc, s.m1.w_enc, s.m2.w_enc, lr, beta1, beta2, eps, s.t);
    adam_update(model.rho, g.rho, s.m1.rho, s.m2.rho, lr, beta1, beta2, eps, s.t);
    adam_update(model.w_dec, g.w_dec, s.m1.w_dec, s.m2.w_dec, lr, beta1, beta2, eps, s.t);
}

TrainResult train(const HyperCube& cube, const InitResult& init, const TrainConfig& cfg) {
    const Index k = init.endmembers.count();
    validate(cfg, k);
    if (init.endmembers.bands() != cube.bands())
        throw Error(ErrorCode::DimensionMismatch, "initial endmembers do not match cube bands");

    const Eigen::MatrixXd& pixels = cube.pixels();
    std::vector<Index> usable;
    for (Index p = 0; p < cube.pixel_count(); ++p)
        if (pixels.col(p).norm() > 0) usable.push_back(p);
    if (usable.empty()) throw Error(ErrorCode::DegenerateCube, "cube has no nonzero pixels");

    double sigma = cfg.corrupt_sigma;
    if (sigma < 0) {
        const double mean = pixels.mean();
        sigma = 0.1 * std::sqrt((pixels.array() - mean).square().mean());
    }

    TrainResult result{Model::from_endmembers(init.endmembers.signatures()), {}};
    Model& model = result.model;
    AdamState adam = AdamState::zeros_like(model);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, usable.size() - 1);

    const Index n = cfg.batch_size, d = cube.bands();
    Eigen::MatrixXd targets(d, n), inputs(d, n);
    double acc_loss = 0, acc_z = 0, acc_sad = 0;
    long acc_count = 0;

    for (long it = 1; it <= cfg.iters; ++it) {
        for (Index j = 0; j < n; ++j) {
            targets.col(j) = pixels.col(usable[pick(rng)]);
            inputs.col(j) = corrupt(targets.col(j), cfg.corrupt_mask_frac, sigma, rng);
        }
        try {
            const auto trace = forward(model, inputs, cfg.hyper, Mode::Train, rng);
            const auto l = loss(trace, model, cfg.hyper, targets);
            update_running_stats(model.stats, trace.bn);
            adam_step(model, l.grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);

            acc_loss += l.value;
            acc_z += l.sparsity;
            for (Index j = 0; j < n; ++j)
                acc_sad += trace.x_hat.col(j).norm() > 0 ? spectral_angle(targets.col(j), trace.x_hat.col(j))
                                                         : std::numbers::pi;
            ++acc_count;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NumericalDivergence || e.code() == ErrorCode::DegenerateData)
                throw Error(ErrorCode::NumericalDivergence,
                            std::string(e.what()) + " at iteration " + std::to_string(it));
            throw;
        }
        if (it % cfg.log_every == 0 || it == cfg.iters) {
            result.log.entries.push_back(TrainLogEntry{it, acc_loss / acc_count, acc_z / acc_count,
                                                       acc_sad / (acc_count * static_cast<double>(n))});
            acc_loss = acc_z = acc_sad = 0;
            acc_count = 0;
        }
    }
    return result;
}

double mean_activation_l1(const Model& model, const HyperCube& cube, const HyperParams& hyper) {
    double total = 0;
    Index count = 0;
    constexpr Index kChunk = 1024;
    for (Index p0 = 0; p0 < cube.pixel_count(); p0 += kChunk) {
        const Index len = std::min(kChunk, cube.pixel_count() - p0);
        std::vector<Index> cols;
        for (Index p = p0; p < p0 + len; ++p)
            if (cube.pixel(p).norm() > 0) cols.push_back(p);
        if (cols.empty()) continue;
        const Eigen::MatrixXd block = cube.pixels()(Eigen::all, cols);
        const auto t = forward(model, block, hyper, Mode::Infer);
        total += t.z.cwiseAbs().sum();
        count += static_cast<Index>(cols.size());
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

} // namespace endnet
