#include "endnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace endnet {

std::vector<Index> min_cost_assignment(const Eigen::MatrixXd& cost) {
    const Index n = cost.rows(), m = cost.cols();
    if (n > m) throw Error(ErrorCode::DimensionMismatch, "assignment needs rows <= columns");
    if (n == 0) return {};
    // Shortest augmenting path formulation with row/column potentials
    // (1-based internally; column 0 is the virtual source).
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(m + 1), 0.0);
    std::vector<Index> owner(static_cast<std::size_t>(m + 1), 0), way(static_cast<std::size_t>(m + 1), 0);
    for (Index i = 1; i <= n; ++i) {
        owner[0] = i;
        Index j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m + 1), inf);
        std::vector<char> used(static_cast<std::size_t>(m + 1), 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const Index i0 = owner[static_cast<std::size_t>(j0)];
            double delta = inf;
            Index j1 = 0;
            for (Index j = 1; j <= m; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[sj];
                if (cur < minv[sj]) {
                    minv[sj] = cur;
                    way[sj] = j0;
                }
                if (minv[sj] < delta) {
                    delta = minv[sj];
                    j1 = j;
                }
            }
            for (Index j = 0; j <= m; ++j) {
                const auto sj = static_cast<std::size_t>(j);
                if (used[sj]) {
                    u[static_cast<std::size_t>(owner[sj])] += delta;
                    v[sj] -= delta;
                } else {
                    minv[sj] -= delta;
                }
            }
            j0 = j1;
        } while (owner[static_cast<std::size_t>(j0)] != 0);
        do {
            const Index j1 = way[static_cast<std::size_t>(j0)];
            owner[static_cast<std::size_t>(j0)] = owner[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<Index> result(static_cast<std::size_t>(n), -1);
    for (Index j = 1; j <= m; ++j) {
        const Index i = owner[static_cast<std::size_t>(j)];
        if (i > 0) result[static_cast<std::size_t>(i - 1)] = j - 1;
    }
    return result;
}

Eigen::MatrixXd sad_cost_matrix(const SpectraMatrix& estimated, const SpectraMatrix& truth) {
    if (estimated.bands() != truth.bands())
        throw Error(ErrorCode::DimensionMismatch,
                    "band count mismatch: " + std::to_string(estimated.bands()) + " vs " +
                        std::to_string(truth.bands()));
    Eigen::MatrixXd cost(truth.count(), estimated.count());
    for (Index t = 0; t < truth.count(); ++t)
        for (Index e = 0; e < estimated.count(); ++e)
            cost(t, e) = sad_metric(truth.signature(t), estimated.signature(e));
    return cost;
}

std::vector<Index> match_endmembers(const SpectraMatrix& estimated, const SpectraMatrix& truth,
                                    MatchMode mode) {
    const Eigen::MatrixXd cost = sad_cost_matrix(estimated, truth);
    if (mode == MatchMode::Greedy) {
        std::vector<Index> result(static_cast<std::size_t>(truth.count()));
        for (Index t = 0; t < truth.count(); ++t) {
            Index best = 0;
            cost.row(t).minCoeff(&best);
            result[static_cast<std::size_t>(t)] = best;
        }
        return result;
    }
    if (estimated.count() < truth.count())
        throw Error(ErrorCode::DimensionMismatch, "fewer estimated endmembers than ground-truth ones");
    return min_cost_assignment(cost);
}

EvalReport evaluate(const SpectraMatrix& estimated, const AbundanceMap* estimated_abundances,
                    const SpectraMatrix& truth, const AbundanceMap* truth_abundances,
                    MatchMode mode) {
    EvalReport r;
    r.assignment = match_endmembers(estimated, truth, mode);
    for (Index t = 0; t < truth.count(); ++t) {
        const Index e = r.assignment[static_cast<std::size_t>(t)];
        r.per_endmember_sad.push_back(sad_metric(truth.signature(t), estimated.signature(e)));
    }
    for (Index e = 0; e < estimated.count(); ++e)
        if (std::find(r.assignment.begin(), r.assignment.end(), e) == r.assignment.end())
            r.unmatched.push_back(e);
    r.avg_sad = std::accumulate(r.per_endmember_sad.begin(), r.per_endmember_sad.end(), 0.0) /
                static_cast<double>(r.per_endmember_sad.size());

    if (estimated_abundances && truth_abundances) {
        const auto& ea = estimated_abundances->fractions;
        const auto& ta = truth_abundances->fractions;
        if (ea.rows() != estimated.count() || ta.rows() != truth.count())
            throw Error(ErrorCode::DimensionMismatch, "abundance map does not match its endmember count");
        if (ea.cols() != ta.cols())
            throw Error(ErrorCode::DimensionMismatch,
                        "abundance maps cover different pixel counts: " + std::to_string(ea.cols()) +
                            " vs " + std::to_string(ta.cols()));
        for (Index t = 0; t < truth.count(); ++t) {
            const Index e = r.assignment[static_cast<std::size_t>(t)];
            r.per_endmember_rmse.push_back(rmse_metric(ta.row(t), ea.row(e)));
        }
        r.avg_rmse = std::accumulate(r.per_endmember_rmse.begin(), r.per_endmember_rmse.end(), 0.0) /
                     static_cast<double>(r.per_endmember_rmse.size());
    }
    return r;
}

namespace {

std::string format(const char* fmt, double a, double b = 0.0) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, a, b);
    return buf;
}

// Population mean and standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n)};
}

} // namespace

std::string EvalReport::to_csv() const {
    std::string out = "endmember,estimated_index,sad,rmse\n";
    for (std::size_t t = 0; t < per_endmember_sad.size(); ++t) {
        out += std::to_string(t + 1) + "," + std::to_string(assignment[t] + 1) + "," +
               format("%.10g", per_endmember_sad[t]) + "," +
               (per_endmember_rmse.empty() ? std::string() : format("%.10g", per_endmember_rmse[t])) +
               "\n";
    }
    out += "average,," + format("%.10g", avg_sad) + "," +
           (avg_rmse ? format("%.10g", *avg_rmse) : std::string()) + "\n";
    return out;
}

std::string EvalReport::to_text() const {
    std::string out = "endmember  estimate  SAD(x1e-2)  RMSE(x1e-2)\n";
    for (std::size_t t = 0; t < per_endmember_sad.size(); ++t) {
        out += format("%9.0f  ", static_cast<double>(t + 1)) +
               format("%8.0f  ", static_cast<double>(assignment[t] + 1)) +
               format("%10.2f  ", 100.0 * per_endmember_sad[t]) +
               (per_endmember_rmse.empty() ? std::string("          -")
                                           : format("%11.2f", 100.0 * per_endmember_rmse[t])) +
               "\n";
    }
    out += "  average            " + format("%10.2f  ", 100.0 * avg_sad) +
           (avg_rmse ? format("%11.2f", 100.0 * *avg_rmse) : std::string("          -")) + "\n";
    if (!unmatched.empty()) {
        out += "unmatched estimates:";
        for (Index e : unmatched) out += " " + std::to_string(e + 1);
        out += "\n";
    }
    return out;
}

RepeatSummary summarize(const std::vector<EvalReport>& runs) {
    if (runs.empty()) throw Error(ErrorCode::Config, "no runs to summarize");
    RepeatSummary s;
    s.runs = static_cast<int>(runs.size());
    const std::size_t k = runs.front().per_endmember_sad.size();
    const bool has_rmse = std::all_of(runs.begin(), runs.end(),
                                      [](const EvalReport& r) { return r.avg_rmse.has_value(); });
    for (std::size_t t = 0; t < k; ++t) {
        std::vector<double> sad, rmse;
        for (const auto& r : runs) {
            if (r.per_endmember_sad.size() != k)
                throw Error(ErrorCode::DimensionMismatch, "runs disagree on endmember count");
            sad.push_back(r.per_endmember_sad[t]);
            if (has_rmse) rmse.push_back(r.per_endmember_rmse[t]);
        }
        auto [m, sd] = mean_std(sad);
        s.sad_mean.push_back(m);
        s.sad_std.push_back(sd);
        if (has_rmse) {
            auto [rm, rsd] = mean_std(rmse);
            s.rmse_mean.push_back(rm);
            s.rmse_std.push_back(rsd);
        }
    }
    std::vector<double> avg_sad, avg_rmse;
    for (const auto& r : runs) {
        avg_sad.push_back(r.avg_sad);
        if (has_rmse) avg_rmse.push_back(*r.avg_rmse);
    }
    std::tie(s.avg_sad_mean, s.avg_sad_std) = mean_std(avg_sad);
    if (has_rmse) {
        auto [m, sd] = mean_std(avg_rmse);
        s.avg_rmse_mean = m;
        s.avg_rmse_std = sd;
    }
    return s;
}

std::string RepeatSummary::to_csv() const {
    std::string out = "endmember,sad_mean,sad_std,rmse_mean,rmse_std\n";
    auto rmse_cols = [&](std::optional<double> m, std::optional<double> sd) {
        return m ? format("%.10g,", *m) + format("%.10g", *sd) : std::string(",");
    };
    for (std::size_t t = 0; t < sad_mean.size(); ++t) {
        out += std::to_string(t + 1) + "," + format("%.10g,", sad_mean[t]) + format("%.10g,", sad_std[t]) +
               (rmse_mean.empty() ? std::string(",") : rmse_cols(rmse_mean[t], rmse_std[t])) + "\n";
    }
    out += "average," + format("%.10g,", avg_sad_mean) + format("%.10g,", avg_sad_std) +
           rmse_cols(avg_rmse_mean, avg_rmse_std) + "\n";
    return out;
}

std::string RepeatSummary::to_text() const {
    std::string out = "runs: " + std::to_string(runs) + "\n";
    out += "endmember  SAD mean+-std (x1e-2)   RMSE mean+-std (x1e-2)\n";
    auto pair = [](double m, double sd) { return format("%8.2f +- %-8.2f", 100.0 * m, 100.0 * sd); };
    for (std::size_t t = 0; t < sad_mean.size(); ++t) {
        out += format("%9.0f  ", static_cast<double>(t + 1)) + pair(sad_mean[t], sad_std[t]) + "   " +
               (rmse_mean.empty() ? std::string("-") : pair(rmse_mean[t], rmse_std[t])) + "\n";
    }
    out += "  average  " + pair(avg_sad_mean, avg_sad_std) + "   " +
           (avg_rmse_mean ? pair(*avg_rmse_mean, *avg_rmse_std) : std::string("-")) + "\n";
    return out;
}

} // namespace endnet
