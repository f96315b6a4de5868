#pragma once

#include <cstdint>
#include <limits>

#include "endnet/types.hpp"

namespace endnet {

struct SynthSpec {
    Index k = 4;
    Index bands = 100;
    Index n_pixels = 2500;
    double snr_db = std::numeric_limits<double>::infinity();
    double pure_pixel_fraction = 0.05;
    double dirichlet_alpha = 1.0;
    std::uint64_t seed = 0;
};

struct SynthScene {
    HyperCube cube;
    SpectraMatrix endmembers;
    AbundanceMap abundances;
};

void validate(const SynthSpec& spec);

// Linear-mixing scene x = E y + noise. Endmembers are sums of Gaussian bumps
// in [0, 1]; abundances are Dirichlet(alpha) with a pure_pixel_fraction of
// one-hot pixels assigned round-robin over endmembers. The cube is square
// when n_pixels is a perfect square and n_pixels x 1 otherwise.
SynthScene synth_scene(const SynthSpec& spec);

} // namespace endnet
