#include "endnet/abundance.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numbers>
#include <unordered_map>

#include "endnet/parallel.hpp"

namespace endnet {

namespace {

// Closest point of the face spanned by `face` (a vertex bitmask) to the point,
// in coordinates relative to vertex 0 of the full set:
//   gram(i, j) = <e_i - e_0, e_j - e_0>,  rhs(i) = <x - e_0, e_i - e_0>.
class FaceSearch {
public:
    FaceSearch(const Eigen::MatrixXd& vertex_d2, const Eigen::VectorXd& point_d2)
        : k_(vertex_d2.rows()), x0_sq_(point_d2(0)) {
        gram_.resize(k_, k_);
        rhs_.resize(k_);
        for (Index i = 0; i < k_; ++i) {
            rhs_(i) = 0.5 * (vertex_d2(i, 0) + point_d2(0) - point_d2(i));
            for (Index j = 0; j < k_; ++j)
                gram_(i, j) = 0.5 * (vertex_d2(i, 0) + vertex_d2(j, 0) - vertex_d2(i, j));
        }
    }

    struct Candidate {
        Eigen::VectorXd coords;  // length K, zero outside the face
        double dist2 = std::numeric_limits<double>::infinity();
    };

    // Exact projection: affine projection on the face; when coordinates go
    // negative the answer lies on a facet opposite one of those vertices.
    // The most negative vertex is dropped first, the remaining negative
    // facets are also searched, and the closest result wins.
    Candidate solve(std::uint64_t face) {
        if (auto it = memo_.find(face); it != memo_.end()) return it->second;
        Candidate out;
        const Eigen::VectorXd a = affine_projection(face);
        std::vector<Index> negative;
        for (Index i = 0; i < k_; ++i)
            if ((face >> i & 1u) && a(i) < 0) negative.push_back(i);
        if (negative.empty()) {
            out.coords = a;
            out.dist2 = distance2(a);
        } else {
            std::stable_sort(negative.begin(), negative.end(),
                             [&](Index p, Index q) { return a(p) < a(q); });
            for (Index v : negative) {
                Candidate c = solve(face & ~(std::uint64_t{1} << v));
                if (c.dist2 < out.dist2 - 1e-15) out = std::move(c);
            }
        }
        memo_.emplace(face, out);
        return out;
    }

private:
    Eigen::VectorXd affine_projection(std::uint64_t face) const {
        std::vector<Index> idx;
        for (Index i = 0; i < k_; ++i)
            if (face >> i & 1u) idx.push_back(i);
        const auto m = static_cast<Index>(idx.size());
        Eigen::VectorXd a = Eigen::VectorXd::Zero(k_);
        if (m == 1) {
            a(idx[0]) = 1.0;
            return a;
        }
        // [G_SS 1; 1' 0] [a; -mu] = [rhs_S; 1]
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
        Eigen::VectorXd b(m + 1);
        for (Index r = 0; r < m; ++r) {
            for (Index c = 0; c < m; ++c) kkt(r, c) = gram_(idx[r], idx[c]);
            kkt(r, m) = kkt(m, r) = 1.0;
            b(r) = rhs_(idx[r]);
        }
        b(m) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        lu.setThreshold(1e-10);
        if (lu.rank() < m + 1)
            throw Error(ErrorCode::DegenerateSimplex, "endmembers are not affinely independent");
        const Eigen::VectorXd sol = lu.solve(b);
        for (Index r = 0; r < m; ++r) a(idx[r]) = sol(r);
        return a;
    }

    double distance2(const Eigen::VectorXd& a) const {
        return x0_sq_ - 2.0 * a.dot(rhs_) + a.dot(gram_ * a);
    }

    Index k_;
    double x0_sq_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd rhs_;
    std::unordered_map<std::uint64_t, Candidate> memo_;
};

Eigen::VectorXd uniform(Index k) { return Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)); }

} // namespace

Eigen::VectorXd simplex_project(const Eigen::MatrixXd& vertex_d2, const Eigen::VectorXd& point_d2) {
    const Index k = vertex_d2.rows();
    if (k < 1 || vertex_d2.cols() != k || point_d2.size() != k)
        throw Error(ErrorCode::DimensionMismatch, "simplex_project: inconsistent distance shapes");
    if (k > 63) throw Error(ErrorCode::Config, "simplex_project supports at most 63 vertices");
    if (k == 1) return Eigen::VectorXd::Ones(1);
    FaceSearch search(vertex_d2, point_d2);
    const std::uint64_t all = (std::uint64_t{1} << k) - 1;
    Eigen::VectorXd a = search.solve(all).coords;
    a = a.cwiseMax(0.0);
    return a / a.sum();
}

Eigen::MatrixXd sad_kernel_d2(const Eigen::MatrixXd& e) {
    const Index k = e.cols();
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(k, k);
    for (Index i = 0; i < k; ++i)
        for (Index j = i + 1; j < k; ++j)
            d2(i, j) = d2(j, i) = 2.0 * spectral_angle(e.col(i), e.col(j)) / std::numbers::pi;
    return d2;
}

Eigen::VectorXd sad_kernel_d2(const Eigen::VectorXd& pixel, const Eigen::MatrixXd& e) {
    Eigen::VectorXd d2(e.cols());
    for (Index i = 0; i < e.cols(); ++i) d2(i) = 2.0 * spectral_angle(pixel, e.col(i)) / std::numbers::pi;
    return d2;
}

Eigen::VectorXd spu_sad(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers) {
    if (pixel.size() != endmembers.bands())
        throw Error(ErrorCode::DimensionMismatch, "pixel and endmember band counts differ");
    return simplex_project(sad_kernel_d2(endmembers.signatures()), sad_kernel_d2(pixel, endmembers.signatures()));
}

Eigen::VectorXd spu_l2(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers) {
    if (pixel.size() != endmembers.bands())
        throw Error(ErrorCode::DimensionMismatch, "pixel and endmember band counts differ");
    const auto& e = endmembers.signatures();
    const Index k = e.cols();
    Eigen::MatrixXd d2(k, k);
    Eigen::VectorXd p2(k);
    for (Index i = 0; i < k; ++i) {
        p2(i) = (pixel - e.col(i)).squaredNorm();
        for (Index j = 0; j < k; ++j) d2(i, j) = (e.col(i) - e.col(j)).squaredNorm();
    }
    return simplex_project(d2, p2);
}

Eigen::VectorXd fcls(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers) {
    const auto& e = endmembers.signatures();
    const Index k = e.cols();
    if (pixel.size() != e.rows()) throw Error(ErrorCode::DimensionMismatch, "pixel and endmember band counts differ");
    if (k == 1) return Eigen::VectorXd::Ones(1);
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(e).rank() < k)
        throw Error(ErrorCode::RankDeficient, "endmembers are linearly dependent");

    const Eigen::MatrixXd q = e.transpose() * e;
    const Eigen::VectorXd c = e.transpose() * pixel;

    // Feasible start: the vertex closest to the pixel; all other bounds active.
    Index start = 0;
    (e.colwise() - pixel).colwise().squaredNorm().minCoeff(&start);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
    a(start) = 1.0;
    std::vector<bool> at_bound(static_cast<std::size_t>(k), true);
    at_bound[static_cast<std::size_t>(start)] = false;

    const double tol = 1e-12 * std::max(1.0, q.diagonal().maxCoeff());
    for (int iter = 0; iter < 50 * static_cast<int>(k) + 100; ++iter) {
        std::vector<Index> free;
        for (Index i = 0; i < k; ++i)
            if (!at_bound[static_cast<std::size_t>(i)]) free.push_back(i);
        const auto m = static_cast<Index>(free.size());

        // Equality-constrained minimizer on the free set:
        // [Q_FF -1; 1' 0] [a_F; nu] = [c_F; 1]
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
        Eigen::VectorXd rhs(m + 1);
        for (Index r = 0; r < m; ++r) {
            for (Index s = 0; s < m; ++s) kkt(r, s) = q(free[r], free[s]);
            kkt(r, m) = -1.0;
            kkt(m, r) = 1.0;
            rhs(r) = c(free[r]);
        }
        rhs(m) = 1.0;
        const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
        Eigen::VectorXd target = Eigen::VectorXd::Zero(k);
        for (Index r = 0; r < m; ++r) target(free[r]) = sol(r);
        const double nu = sol(m);

        const Eigen::VectorXd step = target - a;
        if (step.cwiseAbs().maxCoeff() <= 1e-13) {
            // Stationary on the working set: release the bound with the most
            // negative multiplier, or stop.
            const Eigen::VectorXd grad = q * a - c;
            Index worst = -1;
            double worst_value = -tol;
            for (Index i = 0; i < k; ++i) {
                if (!at_bound[static_cast<std::size_t>(i)]) continue;
                const double lambda = grad(i) - nu;
                if (lambda < worst_value) {
                    worst_value = lambda;
                    worst = i;
                }
            }
            if (worst < 0) break;
            at_bound[static_cast<std::size_t>(worst)] = false;
            continue;
        }

        double alpha = 1.0;
        Index blocking = -1;
        for (Index i : free) {
            if (step(i) < 0) {
                const double ratio = -a(i) / step(i);
                if (ratio < alpha) {
                    alpha = ratio;
                    blocking = i;
                }
            }
        }
        a += alpha * step;
        if (blocking >= 0) {
            a(blocking) = 0.0;
            at_bound[static_cast<std::size_t>(blocking)] = true;
        }
    }
    a = a.cwiseMax(0.0);
    return a / a.sum();
}

AbundanceMap hidden_abundances(const Model& model, const HyperCube& cube, const HyperParams& hyper,
                               Index* fallback_count) {
    if (cube.bands() != model.bands())
        throw Error(ErrorCode::DimensionMismatch, "cube and model band counts differ");
    const Index k = model.k(), n = cube.pixel_count();
    AbundanceMap map{cube.height(), cube.width(), Eigen::MatrixXd(k, n)};
    constexpr Index kChunk = 256;
    const long chunks = static_cast<long>((n + kChunk - 1) / kChunk);
    std::vector<Index> dead(static_cast<std::size_t>(chunks), 0);
    parallel_for(chunks, [&](long c) {
        const Index p0 = c * kChunk, len = std::min(kChunk, n - p0);
        std::vector<Index> live;
        for (Index p = p0; p < p0 + len; ++p) {
            if (cube.pixel(p).norm() > 0) live.push_back(p);
            else map.fractions.col(p) = uniform(k);
        }
        Eigen::MatrixXd block(cube.bands(), static_cast<Index>(live.size()));
        for (Index j = 0; j < block.cols(); ++j) block.col(j) = cube.pixel(live[static_cast<std::size_t>(j)]);
        Index count = len - static_cast<Index>(live.size());
        if (block.cols() > 0) {
            const auto t = forward(model, block, hyper, Mode::Infer);
            for (Index j = 0; j < block.cols(); ++j) {
                const Index p = live[static_cast<std::size_t>(j)];
                if (t.y.col(j).sum() > 0) {
                    map.fractions.col(p) = t.y.col(j);
                } else {
                    map.fractions.col(p) = uniform(k);
                    ++count;
                }
            }
        }
        dead[static_cast<std::size_t>(c)] = count;
    });
    if (fallback_count) {
        *fallback_count = 0;
        for (Index c : dead) *fallback_count += c;
    }
    return map;
}

AbundanceMap spu_abundances(const SpectraMatrix& endmembers, const HyperCube& cube) {
    if (cube.bands() != endmembers.bands())
        throw Error(ErrorCode::DimensionMismatch, "cube and endmember band counts differ");
    const Index k = endmembers.count(), n = cube.pixel_count();
    const Eigen::MatrixXd vertex_d2 = sad_kernel_d2(endmembers.signatures());
    AbundanceMap map{cube.height(), cube.width(), Eigen::MatrixXd(k, n)};
    // Surface degenerate endmember sets once, before the per-pixel loop.
    if (k > 1) simplex_project(vertex_d2, vertex_d2.col(0));
    parallel_for(static_cast<long>(n), [&](long p) {
        const Eigen::VectorXd x = cube.pixel(p);
        map.fractions.col(p) = x.norm() > 0
                                   ? simplex_project(vertex_d2, sad_kernel_d2(x, endmembers.signatures()))
                                   : uniform(k);
    });
    return map;
}

AbundanceMap estimate_abundances(const Model& model, const HyperCube& cube, AbundanceMethod method,
                                 const HyperParams& hyper) {
    if (method == AbundanceMethod::Hidden) return hidden_abundances(model, cube, hyper);
    return spu_abundances(SpectraMatrix(model.w_dec), cube);
}

} // namespace endnet
