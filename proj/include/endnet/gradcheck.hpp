#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "endnet/net.hpp"

namespace endnet {

enum class GradLayer { Sad, BatchNorm, L1Norm, FullLoss };

const char* to_string(GradLayer layer);

// Deliberate sign errors used to show that the checker notices broken
// derivatives.
enum class GradFault { None, Sad, BatchNorm, L1Norm, FullLoss };

struct GradCheckConfig {
    int trials = 50;
    std::uint64_t seed = 0;
    double tolerance = 1e-4;
    double step = 1e-5;         // five-point central stencil
    double abs_floor = 1e-5;    // denominator floor for the relative error
    Eigen::Index min_bands = 5, max_bands = 20;
    Eigen::Index min_k = 2, max_k = 6;
    Eigen::Index min_batch = 2, max_batch = 8;
    GradFault fault = GradFault::None;
};

struct LayerCheck {
    GradLayer layer = GradLayer::Sad;
    double max_rel_error = 0.0;
    long checked = 0;
    long skipped = 0;  // coordinates whose stencil crossed a ReLU/top-n/clamp kink
};

struct GradCheckReport {
    std::vector<LayerCheck> layers;
    double tolerance = 0.0;
    bool passed() const;
    std::string to_text() const;
};

// Runs the finite-difference suite on `trials` random small instances.
GradCheckReport run_gradcheck(const GradCheckConfig& cfg);

// Relative error with an absolute floor in the denominator.
double relative_error(double analytic, double numeric, double abs_floor);

} // namespace endnet
