#pragma once

#include "endnet/net.hpp"
#include "endnet/types.hpp"

namespace endnet {

// Point-to-simplex projection in a feature space known only through squared
// distances: vertex_d2 is K x K between vertices, point_d2 holds the squared
// distance of the point to each vertex. Returns barycentric coordinates
// (>= 0, summing to 1) of the closest simplex point. Throws
// DegenerateSimplex when the vertices are not affinely independent.
Eigen::VectorXd simplex_project(const Eigen::MatrixXd& vertex_d2, const Eigen::VectorXd& point_d2);

// Squared SAD-kernel distances d^2(a, b) = 2 - 2 C(a, b) = 2 * angle(a, b) / pi.
Eigen::MatrixXd sad_kernel_d2(const Eigen::MatrixXd& endmembers);
Eigen::VectorXd sad_kernel_d2(const Eigen::VectorXd& pixel, const Eigen::MatrixXd& endmembers);

// Simplex projection unmixing with the SAD kernel.
Eigen::VectorXd spu_sad(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers);

// The same projection with the Euclidean kernel d^2 = |a - b|^2.
Eigen::VectorXd spu_l2(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers);

// Fully constrained least squares: argmin |x - E a|^2 s.t. a >= 0, sum a = 1,
// by a primal active-set method. Throws RankDeficient when E has dependent
// columns.
Eigen::VectorXd fcls(const Eigen::VectorXd& pixel, const SpectraMatrix& endmembers);

// Infer-mode hidden abstracts y per pixel. Pixels whose y is all zero (or
// whose spectrum is all zero) get 1/K everywhere and are counted.
AbundanceMap hidden_abundances(const Model& model, const HyperCube& cube, const HyperParams& hyper,
                               Index* fallback_count = nullptr);

enum class AbundanceMethod { Spu, Hidden };

// SPU over the decoder columns, or the hidden-abstract path.
AbundanceMap estimate_abundances(const Model& model, const HyperCube& cube, AbundanceMethod method,
                                 const HyperParams& hyper = {});

// SPU against an explicit endmember set. All-zero pixels get 1/K.
AbundanceMap spu_abundances(const SpectraMatrix& endmembers, const HyperCube& cube);

} // namespace endnet
