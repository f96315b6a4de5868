#include "endnet/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace endnet {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double parse_double(std::string_view token, const fs::path& path, std::size_t line) {
    const std::string t = trim(token);
    double value = 0.0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (!t.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || t.empty())
        throw Error(ErrorCode::Io, path.string() + ":" + std::to_string(line) +
                                       ": cannot parse number '" + t + "'");
    if (!std::isfinite(value))
        throw Error(ErrorCode::NonFiniteValue, path.string() + ":" + std::to_string(line) +
                                                   ": non-finite value '" + t + "'");
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct CsvTable {
    std::string comment;  // first line when it starts with '#'
    std::vector<std::vector<double>> rows;
};

CsvTable read_numeric_csv(const fs::path& path, bool skip_text_header = false) {
    std::istringstream in(read_file(path));
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (lineno == 1 && t.front() == '#') {
            table.comment = t.substr(1);
            continue;
        }
        if (lineno == 1 && skip_text_header) continue;
        std::vector<double> row;
        for (auto field : split(t, ',')) row.push_back(parse_double(field, path, lineno));
        if (!table.rows.empty() && row.size() != table.rows.front().size())
            throw Error(ErrorCode::SizeMismatch, path.string() + ":" + std::to_string(lineno) +
                                                     ": ragged row");
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

// ---- ENVI ----------------------------------------------------------------

std::map<std::string, std::string> parse_envi_header(const fs::path& hdr) {
    const std::string text = read_file(hdr);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || trim(line).rfind("ENVI", 0) != 0)
        throw Error(ErrorCode::MalformedHeader, hdr.string() + ": missing ENVI signature");

    std::map<std::string, std::string> keys;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = lower(trim(std::string_view(line).substr(0, eq)));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!value.empty() && value.front() == '{') {
            while (value.find('}') == std::string::npos) {
                std::string more;
                if (!std::getline(in, more))
                    throw Error(ErrorCode::MalformedHeader,
                                hdr.string() + ": unterminated '{' for key " + key);
                value += " " + trim(more);
            }
        }
        if (auto it = keys.find(key); it != keys.end() && it->second != value)
            throw Error(ErrorCode::MalformedHeader,
                        hdr.string() + ": contradictory values for key '" + key + "'");
        keys[key] = value;
    }
    return keys;
}

long long header_int(const std::map<std::string, std::string>& keys, const std::string& key,
                     const fs::path& hdr, std::optional<long long> fallback = std::nullopt) {
    const auto it = keys.find(key);
    if (it == keys.end()) {
        if (fallback) return *fallback;
        throw Error(ErrorCode::MalformedHeader, hdr.string() + ": missing key '" + key + "'");
    }
    long long v = 0;
    const auto& s = it->second;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw Error(ErrorCode::MalformedHeader,
                    hdr.string() + ": key '" + key + "' is not an integer: " + s);
    return v;
}

std::pair<fs::path, fs::path> envi_paths(const fs::path& path) {
    if (lower(path.extension().string()) == ".hdr") {
        fs::path base = path;
        base.replace_extension();
        for (const char* ext : {"", ".img", ".raw", ".dat", ".bin", ".bsq", ".bil", ".bip"}) {
            fs::path candidate = base;
            candidate += ext;
            if (fs::is_regular_file(candidate)) return {path, candidate};
        }
        throw Error(ErrorCode::Io, "no payload found next to " + path.string());
    }
    fs::path hdr = path;
    hdr += ".hdr";
    if (fs::is_regular_file(hdr)) return {hdr, path};
    hdr = path;
    hdr.replace_extension(".hdr");
    if (fs::is_regular_file(hdr)) return {hdr, path};
    throw Error(ErrorCode::Io, "no ENVI header found for " + path.string());
}

template <typename T>
T read_scalar(const unsigned char* bytes, bool swap) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes, sizeof(T));
    if (swap) std::reverse(buf, buf + sizeof(T));
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
}

template <typename T>
void append_scalar(std::string& out, T value, bool swap) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if (swap) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
}

Index payload_offset(Interleave il, Index lines, Index samples, Index bands, Index l, Index s,
                     Index b) {
    switch (il) {
    case Interleave::Bsq: return (b * lines + l) * samples + s;
    case Interleave::Bil: return (l * bands + b) * samples + s;
    case Interleave::Bip: return (l * samples + s) * bands + b;
    }
    return 0;
}

const char* interleave_name(Interleave il) {
    switch (il) {
    case Interleave::Bsq: return "bsq";
    case Interleave::Bil: return "bil";
    case Interleave::Bip: return "bip";
    }
    return "bsq";
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(ErrorCode::Io, "read failure on " + path.string());
    return ss.str();
}

void atomic_write(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error(ErrorCode::Io, "write failure on " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
}

CubeFormat guess_format(const fs::path& path) {
    return lower(path.extension().string()) == ".csv" ? CubeFormat::Csv : CubeFormat::Envi;
}

HyperCube load_cube(const fs::path& path, CubeFormat format, std::vector<std::string>* warnings) {
    return format == CubeFormat::Csv ? load_cube_csv(path) : load_envi(path, warnings);
}

HyperCube load_envi(const fs::path& path, std::vector<std::string>* warnings) {
    const auto [hdr, payload_path] = envi_paths(path);
    const auto keys = parse_envi_header(hdr);

    static const std::vector<std::string> known = {
        "samples", "lines", "bands", "interleave", "data type", "byte order",
        "header offset", "wavelength", "wavelength units"};
    if (warnings)
        for (const auto& [k, v] : keys)
            if (std::find(known.begin(), known.end(), k) == known.end())
                warnings->push_back("ignoring ENVI header key '" + k + "'");

    const Index samples = header_int(keys, "samples", hdr);
    const Index lines = header_int(keys, "lines", hdr);
    const Index bands = header_int(keys, "bands", hdr);
    if (samples <= 0 || lines <= 0 || bands <= 0)
        throw Error(ErrorCode::MalformedHeader, hdr.string() + ": non-positive dimension");

    const auto dtype = header_int(keys, "data type", hdr);
    std::size_t elem = 0;
    switch (dtype) {
    case 4: elem = 4; break;
    case 5: elem = 8; break;
    case 12: elem = 2; break;
    default:
        throw Error(ErrorCode::MalformedHeader,
                    hdr.string() + ": unsupported data type " + std::to_string(dtype));
    }
    const auto order = header_int(keys, "byte order", hdr, 0);
    if (order != 0 && order != 1)
        throw Error(ErrorCode::MalformedHeader, hdr.string() + ": byte order must be 0 or 1");
    const auto offset = header_int(keys, "header offset", hdr, 0);

    Interleave il;
    const auto it = keys.find("interleave");
    if (it == keys.end()) throw Error(ErrorCode::MalformedHeader, hdr.string() + ": missing key 'interleave'");
    const std::string ils = lower(it->second);
    if (ils == "bsq") il = Interleave::Bsq;
    else if (ils == "bil") il = Interleave::Bil;
    else if (ils == "bip") il = Interleave::Bip;
    else throw Error(ErrorCode::MalformedHeader, hdr.string() + ": unknown interleave " + ils);

    const std::string raw = read_file(payload_path);
    const std::size_t expected = static_cast<std::size_t>(offset) +
                                 static_cast<std::size_t>(samples * lines * bands) * elem;
    if (raw.size() != expected)
        throw Error(ErrorCode::SizeMismatch, payload_path.string() + ": payload has " +
                                                 std::to_string(raw.size()) + " bytes, header implies " +
                                                 std::to_string(expected));

    const bool file_big = order == 1;
    const bool swap = file_big != (std::endian::native == std::endian::big);
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data()) + offset;

    Eigen::MatrixXd pixels(bands, lines * samples);
    for (Index l = 0; l < lines; ++l)
        for (Index s = 0; s < samples; ++s)
            for (Index b = 0; b < bands; ++b) {
                const auto* at = bytes + payload_offset(il, lines, samples, bands, l, s, b) * elem;
                double v = 0.0;
                switch (dtype) {
                case 4: v = read_scalar<float>(at, swap); break;
                case 5: v = read_scalar<double>(at, swap); break;
                case 12: v = read_scalar<std::uint16_t>(at, swap); break;
                }
                pixels(b, l * samples + s) = v;
            }

    std::vector<double> wavelengths;
    if (auto wl = keys.find("wavelength"); wl != keys.end()) {
        std::string body = wl->second;
        body.erase(std::remove_if(body.begin(), body.end(), [](char c) { return c == '{' || c == '}'; }),
                   body.end());
        for (auto tok : split(body, ','))
            if (!trim(tok).empty()) wavelengths.push_back(parse_double(tok, hdr, 0));
        double scale = 1.0;
        if (auto u = keys.find("wavelength units"); u != keys.end()) {
            const std::string unit = lower(u->second);
            if (unit.rfind("nanometer", 0) == 0 || unit == "nm") scale = 1e-3;
        }
        for (auto& w : wavelengths) w *= scale;
        if (static_cast<Index>(wavelengths.size()) != bands) {
            if (warnings) warnings->push_back("wavelength list length does not match bands; dropped");
            wavelengths.clear();
        }
    }
    return HyperCube(lines, samples, std::move(pixels), std::move(wavelengths));
}

HyperCube load_cube_csv(const fs::path& path) {
    const CsvTable table = read_numeric_csv(path);
    if (table.rows.empty()) throw Error(ErrorCode::SizeMismatch, path.string() + ": no pixels");
    const Index n = static_cast<Index>(table.rows.size());
    const Index d = static_cast<Index>(table.rows.front().size());

    Index height = n;
    Index width = 1;
    if (!table.comment.empty()) {
        std::istringstream ss(table.comment);
        std::string tok;
        Index h = -1, w = -1;
        while (ss >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = lower(tok.substr(0, eq));
            const std::string val = tok.substr(eq + 1);
            if (key == "height") h = std::stol(val);
            if (key == "width") w = std::stol(val);
        }
        if (h > 0 && w > 0) {
            if (h * w != n)
                throw Error(ErrorCode::SizeMismatch, path.string() + ": header declares " +
                                                         std::to_string(h) + "x" + std::to_string(w) +
                                                         " but file has " + std::to_string(n) + " rows");
            height = h;
            width = w;
        }
    }
    Eigen::MatrixXd pixels(d, n);
    for (Index p = 0; p < n; ++p)
        for (Index b = 0; b < d; ++b) pixels(b, p) = table.rows[p][b];
    return HyperCube(height, width, std::move(pixels));
}

void save_cube_csv(const HyperCube& cube, const fs::path& path) {
    std::string out = "# height=" + std::to_string(cube.height()) +
                      " width=" + std::to_string(cube.width()) + "\n";
    for (Index p = 0; p < cube.pixel_count(); ++p) {
        for (Index b = 0; b < cube.bands(); ++b) {
            if (b) out += ',';
            out += format_double(cube.pixels()(b, p));
        }
        out += '\n';
    }
    atomic_write(path, out);
}

void save_envi(const HyperCube& cube, const fs::path& base, Interleave interleave,
               EnviDataType type, bool big_endian) {
    const Index lines = cube.height(), samples = cube.width(), bands = cube.bands();
    const std::size_t elem = type == EnviDataType::Float32 ? 4 : type == EnviDataType::Float64 ? 8 : 2;
    const bool swap = big_endian != (std::endian::native == std::endian::big);

    std::string payload(static_cast<std::size_t>(lines * samples * bands) * elem, '\0');
    for (Index l = 0; l < lines; ++l)
        for (Index s = 0; s < samples; ++s)
            for (Index b = 0; b < bands; ++b) {
                const double v = cube.pixels()(b, l * samples + s);
                std::string one;
                switch (type) {
                case EnviDataType::Float32: append_scalar<float>(one, static_cast<float>(v), swap); break;
                case EnviDataType::Float64: append_scalar<double>(one, v, swap); break;
                case EnviDataType::UInt16:
                    append_scalar<std::uint16_t>(
                        one, static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L)), swap);
                    break;
                }
                const auto at = payload_offset(interleave, lines, samples, bands, l, s, b) * elem;
                std::memcpy(payload.data() + at, one.data(), elem);
            }

    std::string hdr = "ENVI\n";
    hdr += "samples = " + std::to_string(samples) + "\n";
    hdr += "lines = " + std::to_string(lines) + "\n";
    hdr += "bands = " + std::to_string(bands) + "\n";
    hdr += "header offset = 0\n";
    hdr += "data type = " + std::to_string(static_cast<int>(type)) + "\n";
    hdr += std::string("interleave = ") + interleave_name(interleave) + "\n";
    hdr += std::string("byte order = ") + (big_endian ? "1" : "0") + "\n";
    if (!cube.band_wavelengths().empty()) {
        hdr += "wavelength units = Micrometers\nwavelength = {";
        for (std::size_t i = 0; i < cube.band_wavelengths().size(); ++i)
            hdr += (i ? ", " : "") + format_double(cube.band_wavelengths()[i]);
        hdr += "}\n";
    }
    fs::path hdr_path = base;
    hdr_path += ".hdr";
    atomic_write(base, payload);
    atomic_write(hdr_path, hdr);
}

HyperCube normalize_cube(const HyperCube& cube) {
    const double peak = cube.pixels().size() ? cube.pixels().maxCoeff() : 0.0;
    if (!(peak > 0.0))
        throw Error(ErrorCode::DegenerateCube, "cube maximum is not positive; cannot normalize");
    return HyperCube(cube.height(), cube.width(), cube.pixels() / peak, cube.band_wavelengths());
}

SpectraMatrix load_spectra_csv(const fs::path& path) {
    const CsvTable table = read_numeric_csv(path);
    if (table.rows.empty()) throw Error(ErrorCode::SizeMismatch, path.string() + ": no spectra");
    const Index k = static_cast<Index>(table.rows.size());
    const Index d = static_cast<Index>(table.rows.front().size());
    Eigen::MatrixXd sig(d, k);
    for (Index i = 0; i < k; ++i)
        for (Index b = 0; b < d; ++b) sig(b, i) = table.rows[i][b];
    return SpectraMatrix(std::move(sig));
}

void save_spectra_csv(const SpectraMatrix& spectra, const fs::path& path) {
    std::string out = "# endmembers=" + std::to_string(spectra.count()) +
                      " bands=" + std::to_string(spectra.bands()) + "\n";
    for (Index k = 0; k < spectra.count(); ++k) {
        for (Index b = 0; b < spectra.bands(); ++b) {
            if (b) out += ',';
            out += format_double(spectra.signatures()(b, k));
        }
        out += '\n';
    }
    atomic_write(path, out);
}

AbundanceMap load_abundances_csv(const fs::path& path, Index height, Index width) {
    const CsvTable table = read_numeric_csv(path, /*skip_text_header=*/true);
    if (table.rows.empty() || table.rows.front().size() < 2)
        throw Error(ErrorCode::SizeMismatch, path.string() + ": no abundance rows");
    const Index n = static_cast<Index>(table.rows.size());
    const Index k = static_cast<Index>(table.rows.front().size()) - 1;
    AbundanceMap map;
    if (height > 0 && width > 0) {
        if (height * width != n)
            throw Error(ErrorCode::SizeMismatch, path.string() + ": pixel count does not match " +
                                                     std::to_string(height) + "x" + std::to_string(width));
        map.height = height;
        map.width = width;
    } else {
        map.height = n;
        map.width = 1;
    }
    map.fractions.resize(k, n);
    for (Index p = 0; p < n; ++p)
        for (Index j = 0; j < k; ++j) map.fractions(j, p) = table.rows[p][j + 1];
    return map;
}

void save_abundances_csv(const AbundanceMap& map, const fs::path& path) {
    std::string out = "pixel";
    for (Index j = 0; j < map.k(); ++j) out += ",a" + std::to_string(j + 1);
    out += '\n';
    for (Index p = 0; p < map.pixel_count(); ++p) {
        out += std::to_string(p);
        for (Index j = 0; j < map.k(); ++j) out += "," + format_double(map.fractions(j, p));
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<fs::path> save_abundance_maps(const AbundanceMap& map, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    for (Index j = 0; j < map.k(); ++j) {
        std::string pgm = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
        for (Index p = 0; p < map.pixel_count(); ++p) {
            const double f = std::clamp(map.fractions(j, p), 0.0, 1.0);
            pgm += static_cast<char>(static_cast<unsigned char>(std::floor(255.0 * f + 0.5)));
        }
        char name[32];
        std::snprintf(name, sizeof(name), "abundance_%02d.pgm", static_cast<int>(j + 1));
        written.push_back(out_dir / name);
        atomic_write(written.back(), pgm);
    }
    written.push_back(out_dir / "abundances.csv");
    save_abundances_csv(map, written.back());
    return written;
}

} // namespace endnet
