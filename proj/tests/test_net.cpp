#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "endnet/baseline.hpp"
#include "endnet/gradcheck.hpp"
#include "endnet/net.hpp"
#include "helpers.hpp"

using namespace endnet;
using endnet::testing::scratch_dir;
using endnet::testing::uniform_matrix;

namespace {

// Model whose encoder and decoder are the given endmembers, with running
// statistics taken from one train-mode pass over `data`.
Model calibrated_model(const Eigen::MatrixXd& e, const Eigen::MatrixXd& data, const HyperParams& hyper) {
    Model m = Model::from_endmembers(e);
    const auto t = forward(m, data, hyper, Mode::Train);
    update_running_stats(m.stats, t.bn);
    return m;
}

} // namespace

TEST_CASE("bias-free structure: exactly 2KD + K trainable scalars") {
    std::mt19937_64 rng(1);
    const Model m = Model::from_endmembers(uniform_matrix(7, 3, 0, 1, rng));
    CHECK(m.trainable_count() == 3 * 7 + 3 + 7 * 3);
    CHECK(m.rho.isZero());
    CHECK(m.w_enc.isApprox(m.w_dec.transpose()));
}

TEST_CASE("forward with top_n = K and all-positive responses gives a full simplex vector") {
    std::mt19937_64 rng(2);
    HyperParams hyper;
    hyper.top_n = 3;
    Model m = Model::from_endmembers(uniform_matrix(6, 3, 0.1, 1, rng));
    m.rho.setConstant(10.0);  // every normalized response ends up positive
    const auto t = forward(m, uniform_matrix(6, 5, 0.1, 1, rng), hyper, Mode::Train);
    for (Eigen::Index j = 0; j < 5; ++j) {
        CHECK((t.y.col(j).array() > 0).all());
        CHECK(t.y.col(j).sum() == doctest::Approx(1.0).epsilon(1e-7));
    }
    CHECK((t.x_hat - m.w_dec * t.y).norm() == 0.0);
}

TEST_CASE("infer mode is deterministic and scale invariant") {
    std::mt19937_64 rng(3);
    HyperParams hyper;
    const Eigen::MatrixXd e = uniform_matrix(8, 4, 0.05, 1, rng);
    const Eigen::MatrixXd x = e * uniform_matrix(4, 20, 0, 1, rng);
    const Model m = calibrated_model(e, x, hyper);
    const auto a = forward(m, x, hyper, Mode::Infer);
    const auto b = forward(m, x, hyper, Mode::Infer);
    CHECK(a.y == b.y);
    for (double alpha : {0.1, 10.0}) {
        const auto s = forward(m, Eigen::MatrixXd(alpha * x), hyper, Mode::Infer);
        CHECK((s.y - a.y).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("a pixel equal to an encoder row activates that row most") {
    HyperParams hyper;
    hyper.top_n = 2;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(6, 3);
    e(0, 0) = e(1, 0) = 1.0;
    e(2, 1) = e(3, 1) = 1.0;
    e(4, 2) = e(5, 2) = 1.0;
    e.array() += 0.05;
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd data = e * uniform_matrix(3, 30, 0, 1, rng);
    const Model m = calibrated_model(e, data, hyper);
    for (Eigen::Index j = 0; j < 3; ++j) {
        const auto t = forward(m, Eigen::MatrixXd(e.col(j)), hyper, Mode::Infer);
        Eigen::Index arg = 0;
        t.y.col(0).maxCoeff(&arg);
        CHECK(arg == j);
    }
}

TEST_CASE("forward rejects zero-norm inputs and band mismatches") {
    std::mt19937_64 rng(5);
    const Model m = Model::from_endmembers(uniform_matrix(4, 2, 0.1, 1, rng));
    CHECK_THROWS_AS(forward(m, Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 2)), HyperParams{}, Mode::Train), Error);
    CHECK_THROWS_AS(forward(m, Eigen::MatrixXd(Eigen::MatrixXd::Ones(5, 2)), HyperParams{}, Mode::Train), Error);
}

TEST_CASE("loss at a perfect reconstruction with only the angular term is zero") {
    HyperParams hyper;
    hyper.lambda0 = 0.01;
    hyper.lambda2 = hyper.lambda3 = hyper.lambda4 = hyper.lambda5 = 0.0;
    hyper.top_n = 1;
    // Decoder columns equal the pixels' own spectra so x_hat = x exactly.
    Eigen::MatrixXd e(3, 2);
    e << 1, 0, 0, 1, 0.5, 0.5;
    Model m = Model::from_endmembers(e);
    const auto t = forward(m, e, hyper, Mode::Train);
    REQUIRE((t.x_hat - e).norm() < 1e-7);
    const auto l = loss(t, m, hyper, e);
    // Zero up to the slack the cosine clamp introduces at theta = 1.
    const double slack = -std::log(1.0 - std::acos(1.0 - 1e-7) / std::numbers::pi + 1e-8);
    CHECK(std::abs(l.value - hyper.lambda1 * slack) < 1e-9);
    CHECK(hyper.lambda1 * slack < 2e-3);
}

TEST_CASE("loss of a dead sample stays finite") {
    HyperParams hyper;
    std::mt19937_64 rng(6);
    Model m = Model::from_endmembers(uniform_matrix(5, 3, 0.1, 1, rng));
    m.rho.setConstant(-100.0);  // every unit off
    const Eigen::MatrixXd x = uniform_matrix(5, 4, 0.1, 1, rng);
    const auto t = forward(m, x, hyper, Mode::Train);
    CHECK(t.y.norm() == 0.0);
    CHECK(t.recon_similarity.norm() == 0.0);
    const auto l = loss(t, m, hyper, x);
    CHECK(std::isfinite(l.value));
    double half_sq = 0;
    for (Eigen::Index j = 0; j < 4; ++j) half_sq += 0.5 * x.col(j).squaredNorm() / 4;
    const double expected = hyper.lambda0 * half_sq + hyper.lambda1 * -std::log(1e-8) + l.regularization;
    CHECK(l.value == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("full loss gradient on a 5-band, K=3, batch-4 instance") {
    std::mt19937_64 rng(7);
    HyperParams hyper;
    const Eigen::MatrixXd e = uniform_matrix(5, 3, 0.05, 1, rng);
    Model m = Model::from_endmembers(e);
    m.w_enc += 0.2 * uniform_matrix(3, 5, -1, 1, rng);
    m.rho = uniform_matrix(3, 1, -0.3, 0.3, rng);
    const Eigen::MatrixXd x = e * uniform_matrix(3, 4, 0, 1, rng) + 0.05 * uniform_matrix(5, 4, 0, 1, rng);
    const auto base = forward(m, x, hyper, Mode::Train);
    const auto g = loss(base, m, hyper, x).grads;
    auto f = [&] { return loss(forward(m, x, hyper, Mode::Train), m, hyper, x).value; };
    auto check_block = [&](auto& param, const auto& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double saved = param.data()[i], h = 1e-6;
            param.data()[i] = saved + h;
            const double up = f();
            param.data()[i] = saved - h;
            const double down = f();
            param.data()[i] = saved;
            const double num = (up - down) / (2 * h);
            CHECK(relative_error(grad.data()[i], num, 1e-5) < 1e-4);
        }
    };
    check_block(m.w_enc, g.w_enc);
    check_block(m.rho, g.rho);
    check_block(m.w_dec, g.w_dec);
}

TEST_CASE("gradcheck harness passes and is sensitive to a flipped sign") {
    GradCheckConfig cfg;
    cfg.trials = 10;
    cfg.seed = 1;
    const auto ok = run_gradcheck(cfg);
    CHECK(ok.passed());
    for (const auto& l : ok.layers) CHECK(l.checked > 0);
    for (GradFault fault : {GradFault::Sad, GradFault::BatchNorm, GradFault::L1Norm, GradFault::FullLoss}) {
        cfg.fault = fault;
        CHECK_FALSE(run_gradcheck(cfg).passed());
    }
}

TEST_CASE("gradcheck output is deterministic for a seed") {
    GradCheckConfig cfg;
    cfg.trials = 5;
    cfg.seed = 1;
    CHECK(run_gradcheck(cfg).to_text() == run_gradcheck(cfg).to_text());
}

TEST_CASE("checkpoint round-trip and layout") {
    std::mt19937_64 rng(8);
    Model m = Model::from_endmembers(uniform_matrix(5, 3, 0, 1, rng));
    m.w_enc = uniform_matrix(3, 5, -1, 1, rng);
    m.rho = uniform_matrix(3, 1, -1, 1, rng);
    m.stats.mean = uniform_matrix(3, 1, 0, 1, rng);
    m.stats.var = uniform_matrix(3, 1, 0, 1, rng);
    const std::string bytes = checkpoint_bytes(m);
    CHECK(bytes.size() == 16 + 8 * (2 * 5 * 3 + 3 * 3));
    CHECK(bytes.substr(0, 4) == "ENDN");
    CHECK(static_cast<unsigned char>(bytes[4]) == 1);
    CHECK(static_cast<unsigned char>(bytes[8]) == 5);
    CHECK(static_cast<unsigned char>(bytes[12]) == 3);
    double first = 0;
    std::memcpy(&first, bytes.data() + 16, 8);  // little-endian host
    CHECK(first == m.w_enc(0, 0));
    double second = 0;
    std::memcpy(&second, bytes.data() + 24, 8);
    CHECK(second == m.w_enc(0, 1));  // row-major

    const auto path = scratch_dir("ckpt") / "m.endn";
    save_checkpoint(m, path);
    const Model r = load_checkpoint(path);
    CHECK(r.w_enc == m.w_enc);
    CHECK(r.w_dec == m.w_dec);
    CHECK(r.rho == m.rho);
    CHECK(r.stats.var == m.stats.var);
    CHECK(checkpoint_bytes(r) == bytes);
}

TEST_CASE("corrupted checkpoints are rejected") {
    std::mt19937_64 rng(9);
    const std::string bytes = checkpoint_bytes(Model::from_endmembers(uniform_matrix(4, 2, 0, 1, rng)));
    CHECK_THROWS_AS(model_from_checkpoint_bytes("XXXX" + bytes.substr(4)), Error);
    CHECK_THROWS_AS(model_from_checkpoint_bytes(bytes.substr(0, bytes.size() - 1)), Error);
    std::string v2 = bytes;
    v2[4] = 2;
    CHECK_THROWS_AS(model_from_checkpoint_bytes(v2), Error);
    CHECK_THROWS_AS(load_checkpoint(scratch_dir("ckpt_missing") / "none.endn"), Error);
}

TEST_CASE("baseline sigmoid autoencoder gradients match finite differences") {
    std::mt19937_64 rng(10);
    auto net = BaselineAutoencoder<double>::random(6, 3, rng, 0.5);
    const Eigen::MatrixXd x = uniform_matrix(6, 4, 0, 1, rng);
    const auto r = baseline_loss(net, x);
    auto check_block = [&](auto& param, const auto& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double saved = param.data()[i], h = 1e-6;
            param.data()[i] = saved + h;
            const double up = baseline_loss(net, x).value;
            param.data()[i] = saved - h;
            const double down = baseline_loss(net, x).value;
            param.data()[i] = saved;
            CHECK(relative_error(grad.data()[i], (up - down) / (2 * h), 1e-7) < 1e-5);
        }
    };
    check_block(net.w_enc, r.grads.w_enc);
    check_block(net.b_enc, r.grads.b_enc);
    check_block(net.w_dec, r.grads.w_dec);
    check_block(net.b_dec, r.grads.b_dec);
}
