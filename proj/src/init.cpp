#include "endnet/init.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <limits>
#include <random>
#include <string>

namespace endnet {

namespace {

void check_request(const HyperCube& cube, Index k) {
    if (k < 1) throw Error(ErrorCode::Config, "endmember count must be positive");
    // k vertices span a (k-1)-dimensional affine hull, so k <= D + 1.
    if (k > cube.bands() + 1 || k > cube.pixel_count())
        throw Error(ErrorCode::Config, "endmember count " + std::to_string(k) +
                                           " exceeds min(bands + 1, pixels)");
}

// Argmax of `score` over pixels not yet chosen; ties go to the lower index.
Index argmax_excluding(const Eigen::VectorXd& score, const std::vector<Index>& chosen) {
    Index best = -1;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Index p = 0; p < score.size(); ++p) {
        if (std::find(chosen.begin(), chosen.end(), p) != chosen.end()) continue;
        if (score(p) > best_value) {
            best_value = score(p);
            best = p;
        }
    }
    return best;
}

InitResult gather(const HyperCube& cube, std::vector<Index> indices) {
    Eigen::MatrixXd e(cube.bands(), static_cast<Index>(indices.size()));
    for (Index j = 0; j < e.cols(); ++j) e.col(j) = cube.pixel(indices[static_cast<std::size_t>(j)]);
    return InitResult{SpectraMatrix(std::move(e)), std::move(indices)};
}

} // namespace

InitResult vca(const HyperCube& cube, Index k, std::uint64_t seed) {
    check_request(cube, k);
    const Eigen::MatrixXd& x = cube.pixels();
    const Eigen::VectorXd mean = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - mean;
    if (centered.norm() <= 1e-12 * std::max(1.0, x.norm()))
        throw Error(ErrorCode::DegenerateData, "all pixels are identical");

    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(x.cols());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    // Eigenvalues ascend; leading directions are the rightmost columns.
    const Eigen::MatrixXd& vecs = eig.eigenvectors();
    const Index d = cube.bands();

    if (k == 1) {
        const Eigen::VectorXd proj = (vecs.col(d - 1).transpose() * centered).cwiseAbs().transpose();
        return gather(cube, {argmax_excluding(proj, {})});
    }

    const Eigen::MatrixXd basis = vecs.rightCols(k - 1).rowwise().reverse();
    Eigen::MatrixXd y(k, x.cols());
    y.topRows(k - 1) = basis.transpose() * centered;
    const double c = y.topRows(k - 1).colwise().norm().maxCoeff();
    y.row(k - 1).setConstant(c > 0 ? c : 1.0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
    a(k - 1, 0) = 1.0;
    std::vector<Index> chosen;
    for (Index i = 0; i < k; ++i) {
        Eigen::VectorXd w(k);
        for (Index j = 0; j < k; ++j) w(j) = gauss(rng);
        const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
        Eigen::VectorXd f = w - a * (cod.pseudoInverse() * w);
        const double fn = f.norm();
        if (fn > 0) f /= fn;
        const Eigen::VectorXd v = (f.transpose() * y).cwiseAbs().transpose();
        const Index pick = argmax_excluding(v, chosen);
        chosen.push_back(pick);
        a.col(i) = y.col(pick);
    }
    return gather(cube, std::move(chosen));
}

InitResult dmaxd(const HyperCube& cube, Index k) {
    check_request(cube, k);
    const Eigen::MatrixXd& x = cube.pixels();
    const Index n = x.cols();
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    const double tol = 1e-24 * scale * scale * static_cast<double>(cube.bands());

    // Farthest pair via blocked Gram products: |xi - xj|^2 = ni + nj - 2 xi.xj.
    const Eigen::RowVectorXd sq = x.colwise().squaredNorm();
    constexpr Index kBlock = 512;
    double best = -1.0;
    Index bi = 0, bj = 0;
    for (Index i0 = 0; i0 < n; i0 += kBlock) {
        const Index ni = std::min(kBlock, n - i0);
        for (Index j0 = i0; j0 < n; j0 += kBlock) {
            const Index nj = std::min(kBlock, n - j0);
            const Eigen::MatrixXd g = x.middleCols(i0, ni).transpose() * x.middleCols(j0, nj);
            for (Index a = 0; a < ni; ++a)
                for (Index b = 0; b < nj; ++b) {
                    const Index i = i0 + a, j = j0 + b;
                    if (j <= i) continue;
                    const double dist = sq(i) + sq(j) - 2.0 * g(a, b);
                    if (dist > best || (dist == best && (i < bi || (i == bi && j < bj)))) {
                        best = dist;
                        bi = i;
                        bj = j;
                    }
                }
        }
    }
    if (n < 2 || best <= tol) throw Error(ErrorCode::DegenerateData, "all pixels are identical");
    if (k == 1) return gather(cube, {bi});

    std::vector<Index> chosen = {bi, bj};
    // Residuals of every pixel against the affine hull of the chosen set,
    // maintained by modified Gram-Schmidt.
    Eigen::MatrixXd residual = x.colwise() - x.col(bi);
    auto deflate = [&](Index pick) {
        const Eigen::VectorXd q = residual.col(pick).normalized();
        residual -= q * (q.transpose() * residual);
    };
    deflate(bj);
    while (static_cast<Index>(chosen.size()) < k) {
        const Eigen::VectorXd dist = residual.colwise().squaredNorm().transpose();
        const Index pick = argmax_excluding(dist, chosen);
        if (pick < 0 || dist(pick) <= tol)
            throw Error(ErrorCode::DegenerateData,
                        "fewer than " + std::to_string(k) + " affinely independent pixels");
        chosen.push_back(pick);
        deflate(pick);
    }
    return gather(cube, std::move(chosen));
}

InitResult initialize(const HyperCube& cube, Index k, InitMethod method, std::uint64_t seed) {
    return method == InitMethod::Vca ? vca(cube, k, seed) : dmaxd(cube, k);
}

} // namespace endnet
