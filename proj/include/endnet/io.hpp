#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "endnet/types.hpp"

namespace endnet {

enum class CubeFormat { Envi, Csv };
enum class Interleave { Bsq, Bil, Bip };

// ENVI "data type" codes understood by the reader and writer.
enum class EnviDataType : int { Float32 = 4, Float64 = 5, UInt16 = 12 };

// Picks Csv for a ".csv" extension, Envi otherwise.
CubeFormat guess_format(const std::filesystem::path& path);

// Loads a cube. For ENVI, `path` may name either the ".hdr" sidecar or the
// raw payload. Header keys the reader does not use are reported through
// `warnings` (when given) and otherwise ignored.
HyperCube load_cube(const std::filesystem::path& path, CubeFormat format,
                    std::vector<std::string>* warnings = nullptr);

HyperCube load_envi(const std::filesystem::path& path,
                    std::vector<std::string>* warnings = nullptr);

// CSV cubes: one pixel per row. An optional first line starting with '#' may
// carry "height=H width=W"; without it the cube is N x 1.
HyperCube load_cube_csv(const std::filesystem::path& path);

void save_cube_csv(const HyperCube& cube, const std::filesystem::path& path);

// Writes `<base>` (payload) and `<base>.hdr`.
void save_envi(const HyperCube& cube, const std::filesystem::path& base,
               Interleave interleave = Interleave::Bip,
               EnviDataType type = EnviDataType::Float64, bool big_endian = false);

// Divides every value by the global maximum. Throws DegenerateCube when the
// maximum is not positive.
HyperCube normalize_cube(const HyperCube& cube);

// Spectra CSV: one signature per row, D comma-separated values, optional
// leading '#' comment line.
SpectraMatrix load_spectra_csv(const std::filesystem::path& path);
void save_spectra_csv(const SpectraMatrix& spectra, const std::filesystem::path& path);

// Abundance CSV: header "pixel,a1,...,aK" then one row per pixel.
AbundanceMap load_abundances_csv(const std::filesystem::path& path, Index height = -1,
                                 Index width = -1);
void save_abundances_csv(const AbundanceMap& map, const std::filesystem::path& path);

// One binary PGM per endmember (byte = round-half-up(255 * fraction)) plus
// "abundances.csv". Returns the written paths, PGMs first.
std::vector<std::filesystem::path> save_abundance_maps(const AbundanceMap& map,
                                                       const std::filesystem::path& out_dir);

// Writes to a temporary sibling and renames over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

} // namespace endnet
