#include "endnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

namespace endnet {

const char* to_string(GradLayer layer) {
    switch (layer) {
    case GradLayer::Sad: return "sad";
    case GradLayer::BatchNorm: return "batchnorm";
    case GradLayer::L1Norm: return "l1norm";
    case GradLayer::FullLoss: return "loss";
    }
    return "?";
}

double relative_error(double analytic, double numeric, double abs_floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
    return std::abs(analytic - numeric) / denom;
}

bool GradCheckReport::passed() const {
    return std::all_of(layers.begin(), layers.end(),
                       [&](const LayerCheck& l) { return l.max_rel_error < tolerance; });
}

std::string GradCheckReport::to_text() const {
    std::string out;
    char line[160];
    for (const auto& l : layers) {
        std::snprintf(line, sizeof(line), "%-10s max_rel_err=%.3e checked=%ld skipped=%ld %s\n",
                      to_string(l.layer), l.max_rel_error, l.checked, l.skipped,
                      l.max_rel_error < tolerance ? "PASS" : "FAIL");
        out += line;
    }
    out += passed() ? "gradcheck: PASS\n" : "gradcheck: FAIL\n";
    return out;
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Five-point central difference of f along one coordinate. `ok` receives
// false when any stencil point lands on the other side of a kink.
template <typename Eval>
double five_point(double& coord, double h, Eval&& eval, bool& ok) {
    const double saved = coord;
    double f[4];
    const double offsets[4] = {2 * h, h, -h, -2 * h};
    ok = true;
    for (int i = 0; i < 4; ++i) {
        coord = saved + offsets[i];
        bool same = true;
        f[i] = eval(same);
        ok = ok && same;
    }
    coord = saved;
    return (-f[0] + 8 * f[1] - 8 * f[2] + f[3]) / (12 * h);
}

class Checker {
public:
    Checker(const GradCheckConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        for (auto layer : {GradLayer::Sad, GradLayer::BatchNorm, GradLayer::L1Norm, GradLayer::FullLoss})
            report_.layers.push_back(LayerCheck{layer});
        report_.tolerance = cfg.tolerance;
    }

    GradCheckReport run() {
        for (int t = 0; t < cfg_.trials; ++t) trial();
        return report_;
    }

private:
    Eigen::Index uniform_index(Eigen::Index lo, Eigen::Index hi) {
        return std::uniform_int_distribution<Eigen::Index>(lo, hi)(rng_);
    }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

    Mat random_matrix(Eigen::Index r, Eigen::Index c, double lo, double hi) {
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
        return m;
    }

    void record(GradLayer layer, double analytic, double numeric, bool ok) {
        auto& l = report_.layers[static_cast<std::size_t>(layer)];
        if (!ok) {
            ++l.skipped;
            return;
        }
        ++l.checked;
        l.max_rel_error = std::max(l.max_rel_error, relative_error(analytic, numeric, cfg_.abs_floor));
    }

    double sign_for(GradFault f) const { return cfg_.fault == f ? -1.0 : 1.0; }

    void trial() {
        const Eigen::Index d = uniform_index(cfg_.min_bands, cfg_.max_bands);
        const Eigen::Index k = uniform_index(cfg_.min_k, cfg_.max_k);
        const Eigen::Index n = uniform_index(cfg_.min_batch, cfg_.max_batch);
        check_sad(d);
        check_batchnorm(k, n);
        check_l1norm(k);
        check_full_loss(d, k, n);
    }

    void check_sad(Eigen::Index d) {
        const double clip = 1e-7;
        Vec x = random_matrix(d, 1, -1.0, 1.0);
        Vec w = random_matrix(d, 1, -1.0, 1.0);
        const auto s = sad_similarity(x, w, clip);
        const Vec g = sign_for(GradFault::Sad) * sad_similarity_grad(x, w, s);
        for (Eigen::Index i = 0; i < d; ++i) {
            bool ok = true;
            const double num = five_point(w(i), cfg_.step, [&](bool& same) {
                const auto p = sad_similarity(x, w, clip);
                same = p.clamped == s.clamped;
                return p.similarity;
            }, ok);
            record(GradLayer::Sad, g(i), num, ok);
        }
    }

    void check_batchnorm(Eigen::Index k, Eigen::Index n) {
        const double eps = 1e-8;
        Mat h = random_matrix(k, n, 0.0, 1.0);
        Vec rho = random_matrix(k, 1, -1.0, 1.0);
        const Mat upstream = random_matrix(k, n, -1.0, 1.0);
        RunningStats<double> stats;
        BatchNormCache<double> cache;
        batchnorm_forward<double>(h, rho, eps, Mode::Train, stats, cache);
        auto grads = batchnorm_backward<double>(upstream, cache);
        grads.d_input *= sign_for(GradFault::BatchNorm);
        grads.d_rho *= sign_for(GradFault::BatchNorm);

        auto objective = [&](bool& same) {
            same = true;
            BatchNormCache<double> c;
            return upstream.cwiseProduct(batchnorm_forward<double>(h, rho, eps, Mode::Train, stats, c)).sum();
        };
        for (Eigen::Index i = 0; i < h.size(); ++i) {
            bool ok = true;
            const double num = five_point(h.data()[i], cfg_.step, objective, ok);
            record(GradLayer::BatchNorm, grads.d_input.data()[i], num, ok);
        }
        for (Eigen::Index i = 0; i < k; ++i) {
            bool ok = true;
            const double num = five_point(rho(i), cfg_.step, objective, ok);
            record(GradLayer::BatchNorm, grads.d_rho(i), num, ok);
        }
    }

    void check_l1norm(Eigen::Index k) {
        Vec z = random_matrix(k, 1, 0.05, 2.0);
        // Knock out some entries; their derivative is defined as zero and the
        // point is a kink, so they are not checked.
        for (Eigen::Index i = 0; i < k; ++i)
            if (k > 1 && uniform(0, 1) < 0.3) z(i) = 0.0;
        const Vec ones = Vec::Ones(k);
        const Vec upstream = random_matrix(k, 1, -1.0, 1.0);
        const auto t = relu_topn_l1<double>(z, ones, k);
        const Vec g = sign_for(GradFault::L1Norm) * l1norm_backward<double>(upstream, t);
        for (Eigen::Index i = 0; i < k; ++i) {
            if (z(i) == 0.0) continue;
            bool ok = true;
            const double num = five_point(z(i), cfg_.step, [&](bool& same) {
                const auto p = relu_topn_l1<double>(z, ones, k);
                same = (p.relu_mask == t.relu_mask).all();
                return upstream.dot(p.y);
            }, ok);
            record(GradLayer::L1Norm, g(i), num, ok);
        }
    }

    static std::vector<bool> kink_signature(const ForwardTrace<double>& t, const Mat& targets,
                                            const HyperParams& hyper) {
        std::vector<bool> sig;
        for (const auto& a : t.act) {
            for (Eigen::Index i = 0; i < a.relu_mask.size(); ++i) sig.push_back(a.relu_mask(i));
            for (Eigen::Index i = 0; i < a.topn_mask.size(); ++i) sig.push_back(a.topn_mask(i));
        }
        for (const auto& s : t.scores) sig.push_back(s.clamped);
        for (Eigen::Index j = 0; j < t.batch(); ++j) {
            const bool alive = t.x_hat.col(j).norm() > 0;
            sig.push_back(alive);
            if (alive) sig.push_back(sad_similarity(targets.col(j), t.x_hat.col(j), hyper.theta_clip).clamped);
        }
        return sig;
    }

    void check_full_loss(Eigen::Index d, Eigen::Index k, Eigen::Index n) {
        HyperParams hyper;
        hyper.lambda0 = uniform(0.1, 1.0);
        hyper.lambda1 = uniform(0.5, 2.0);
        hyper.lambda2 = uniform(0.05, 0.5);
        hyper.lambda3 = uniform(0.01, 0.1);
        hyper.lambda4 = uniform(0.01, 0.1);
        hyper.lambda5 = uniform(0.01, 0.1);
        hyper.top_n = uniform_index(1, k);
        hyper.dropout_p = uniform(0, 1) < 0.5 ? 1.0 : 0.8;

        const Mat endmembers = random_matrix(d, k, 0.05, 1.0);
        Model model = Model::from_endmembers(endmembers);
        model.w_enc += 0.2 * random_matrix(k, d, -1.0, 1.0);
        model.rho = random_matrix(k, 1, -0.5, 0.5);
        const Mat targets = endmembers * random_matrix(k, n, 0.0, 1.0) + 0.05 * random_matrix(d, n, 0.0, 1.0);
        const Mat inputs = targets + 0.02 * random_matrix(d, n, -1.0, 1.0);
        Mat mask = draw_dropout_mask<double>(k, n, hyper.dropout_p, rng_);
        // Keep at least one unit alive per sample so the instance is not degenerate.
        for (Eigen::Index j = 0; j < n; ++j)
            if (mask.col(j).isZero()) mask(0, j) = 1.0 / hyper.dropout_p;

        const auto base = forward(model, inputs, hyper, Mode::Train, &mask);
        const auto base_sig = kink_signature(base, targets, hyper);
        auto grads = loss(base, model, hyper, targets).grads;
        const double s = sign_for(GradFault::FullLoss);

        auto objective = [&](bool& same) {
            const auto t = forward(model, inputs, hyper, Mode::Train, &mask);
            same = kink_signature(t, targets, hyper) == base_sig;
            return loss(t, model, hyper, targets).value;
        };
        auto sweep = [&](auto& param, const auto& grad) {
            for (Eigen::Index i = 0; i < param.size(); ++i) {
                bool ok = true;
                const double num = five_point(param.data()[i], cfg_.step, objective, ok);
                record(GradLayer::FullLoss, s * grad.data()[i], num, ok);
            }
        };
        sweep(model.w_enc, grads.w_enc);
        sweep(model.rho, grads.rho);
        sweep(model.w_dec, grads.w_dec);
    }

    GradCheckConfig cfg_;
    std::mt19937_64 rng_;
    GradCheckReport report_;
};

} // namespace

GradCheckReport run_gradcheck(const GradCheckConfig& cfg) {
    if (cfg.trials < 1) throw Error(ErrorCode::Config, "gradcheck needs at least one trial");
    return Checker(cfg).run();
}

} // namespace endnet
