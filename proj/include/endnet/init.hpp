#pragma once

#include <cstdint>
#include <vector>

#include "endnet/types.hpp"

namespace endnet {

// Initial endmember estimate: the spectra plus the pixel each came from
// (-1 when an estimate is not a data pixel).
struct InitResult {
    SpectraMatrix endmembers;
    std::vector<Index> pixel_indices;
};

enum class InitMethod { Vca, Dmaxd };

// Vertex component analysis in affine mode: mean-removed data projected on
// its leading k-1 principal directions plus a constant coordinate, then k
// rounds of "random direction orthogonal to the chosen endmembers, take the
// pixel with the largest |projection|". k = 1 picks the pixel with the
// largest |projection| on the first principal direction.
InitResult vca(const HyperCube& cube, Index k, std::uint64_t seed);

// Greedy maximum-distance simplex: the farthest pixel pair, then repeatedly
// the pixel farthest from the affine hull of those chosen. Ties go to the
// lowest pixel index.
InitResult dmaxd(const HyperCube& cube, Index k);

InitResult initialize(const HyperCube& cube, Index k, InitMethod method, std::uint64_t seed);

} // namespace endnet
