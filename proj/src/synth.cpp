#include "endnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace endnet {

void validate(const SynthSpec& spec) {
    if (spec.k < 2) throw Error(ErrorCode::Config, "synth: k must be >= 2");
    if (spec.bands <= spec.k) throw Error(ErrorCode::Config, "synth: bands must exceed k");
    if (spec.n_pixels < 1) throw Error(ErrorCode::Config, "synth: n_pixels must be positive");
    if (!(spec.snr_db > 0)) throw Error(ErrorCode::Config, "synth: snr_db must be positive or inf");
    if (!(spec.pure_pixel_fraction >= 0 && spec.pure_pixel_fraction <= 1))
        throw Error(ErrorCode::Config, "synth: pure_pixel_fraction must lie in [0, 1]");
    if (!(spec.dirichlet_alpha > 0)) throw Error(ErrorCode::Config, "synth: dirichlet_alpha must be > 0");
}

namespace {

Eigen::VectorXd bump_spectrum(Index bands, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(3, 6);
    std::uniform_real_distribution<double> center(0.0, static_cast<double>(bands - 1));
    std::uniform_real_distribution<double> width(bands / 20.0, bands / 5.0);
    std::uniform_real_distribution<double> amp(0.2, 1.0);
    std::uniform_real_distribution<double> floor(0.02, 0.15);

    Eigen::VectorXd s = Eigen::VectorXd::Constant(bands, floor(rng));
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const double c = center(rng), w = width(rng), a = amp(rng);
        for (Index b = 0; b < bands; ++b) {
            const double t = (static_cast<double>(b) - c) / w;
            s(b) += a * std::exp(-0.5 * t * t);
        }
    }
    return s / std::max(1.0, s.maxCoeff());
}

} // namespace

SynthScene synth_scene(const SynthSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);

    Eigen::MatrixXd e(spec.bands, spec.k);
    for (Index j = 0; j < spec.k; ++j) e.col(j) = bump_spectrum(spec.bands, rng);

    const Index n = spec.n_pixels;
    Eigen::MatrixXd y(spec.k, n);
    std::gamma_distribution<double> gamma(spec.dirichlet_alpha, 1.0);
    for (Index p = 0; p < n; ++p) {
        double sum = 0.0;
        for (Index j = 0; j < spec.k; ++j) sum += (y(j, p) = gamma(rng));
        if (sum > 0) y.col(p) /= sum;
        else y.col(p).setConstant(1.0 / spec.k);
    }

    const auto n_pure = static_cast<Index>(std::llround(spec.pure_pixel_fraction * n));
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (Index i = 0; i < n_pure; ++i) {
        y.col(order[i]).setZero();
        y(i % spec.k, order[i]) = 1.0;
    }

    Eigen::MatrixXd x = e * y;
    if (std::isfinite(spec.snr_db)) {
        const double signal_power = x.squaredNorm() / static_cast<double>(x.size());
        const double sigma = std::sqrt(signal_power / std::pow(10.0, spec.snr_db / 10.0));
        std::normal_distribution<double> noise(0.0, sigma);
        for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise(rng);
    }

    Index height = n, width = 1;
    const auto root = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(n))));
    if (root * root == n) height = width = root;

    AbundanceMap map{height, width, std::move(y)};
    return SynthScene{HyperCube(height, width, std::move(x)), SpectraMatrix(std::move(e)),
                      std::move(map)};
}

} // namespace endnet
