#pragma once

#include <optional>
#include <string>
#include <vector>

#include "endnet/sad.hpp"
#include "endnet/types.hpp"

namespace endnet {

// Spectral angle in radians, in [0, pi].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar sad_metric(const Eigen::MatrixBase<DerivedA>& e,
                                     const Eigen::MatrixBase<DerivedB>& e_hat) {
    return spectral_angle(e, e_hat);
}

// sqrt(|y - y_hat|^2 / N).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rmse_metric(const Eigen::MatrixBase<DerivedA>& y,
                                      const Eigen::MatrixBase<DerivedB>& y_hat) {
    if (y.size() != y_hat.size() || y.size() == 0)
        throw Error(ErrorCode::DimensionMismatch, "rmse: length mismatch");
    using Scalar = typename DerivedA::Scalar;
    return std::sqrt((y - y_hat).squaredNorm() / static_cast<Scalar>(y.size()));
}

// Rectangular min-cost assignment (rows <= cols): returns, for each row, the
// column it is assigned to. Hungarian algorithm, O(rows^2 * cols).
std::vector<Index> min_cost_assignment(const Eigen::MatrixXd& cost);

// K_truth x K_est matrix of spectral angles.
Eigen::MatrixXd sad_cost_matrix(const SpectraMatrix& estimated, const SpectraMatrix& truth);

enum class MatchMode { Optimal, Greedy };

// For each ground-truth signature, the index of its matched estimate.
// Optimal mode minimizes total SAD over one-to-one assignments; greedy mode
// lets each truth take its most similar estimate (may reuse estimates).
std::vector<Index> match_endmembers(const SpectraMatrix& estimated, const SpectraMatrix& truth,
                                    MatchMode mode = MatchMode::Optimal);

struct EvalReport {
    std::vector<Index> assignment;  // truth index -> estimated index
    std::vector<double> per_endmember_sad;
    std::vector<double> per_endmember_rmse;  // empty without abundance ground truth
    std::vector<Index> unmatched;            // estimates not assigned to any truth
    double avg_sad = 0.0;
    std::optional<double> avg_rmse;

    std::string to_csv() const;   // "endmember,estimated_index,sad,rmse" (1-based indices)
    std::string to_text() const;  // values x 1e-2, as in the usual result tables
};

EvalReport evaluate(const SpectraMatrix& estimated, const AbundanceMap* estimated_abundances,
                    const SpectraMatrix& truth, const AbundanceMap* truth_abundances,
                    MatchMode mode = MatchMode::Optimal);

// Mean and (population) standard deviation of per-endmember values across
// repeated runs.
struct RepeatSummary {
    std::vector<double> sad_mean, sad_std;
    std::vector<double> rmse_mean, rmse_std;
    double avg_sad_mean = 0, avg_sad_std = 0;
    std::optional<double> avg_rmse_mean, avg_rmse_std;
    int runs = 0;

    std::string to_csv() const;
    std::string to_text() const;
};

RepeatSummary summarize(const std::vector<EvalReport>& runs);

} // namespace endnet
