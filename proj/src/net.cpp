#include "endnet/net.hpp"

#include <bit>
#include <cstring>

#include "endnet/io.hpp"

namespace endnet {

void validate(const HyperParams& hyper, Eigen::Index k) {
    if (hyper.top_n < 1 || hyper.top_n > k)
        throw Error(ErrorCode::Config, "top_n must lie in [1, K]");
    if (!(hyper.dropout_p > 0.0 && hyper.dropout_p <= 1.0))
        throw Error(ErrorCode::Config, "dropout keep probability must lie in (0, 1]");
    for (double l : {hyper.lambda0, hyper.lambda1, hyper.lambda2, hyper.lambda3, hyper.lambda4,
                     hyper.lambda5})
        if (!(l >= 0.0)) throw Error(ErrorCode::Config, "loss weights must be non-negative");
    if (!(hyper.eps > 0.0)) throw Error(ErrorCode::Config, "eps must be positive");
    if (!(hyper.theta_clip >= 0.0 && hyper.theta_clip < 1.0))
        throw Error(ErrorCode::Config, "theta_clip must lie in [0, 1)");
}

namespace {

constexpr char kMagic[4] = {'E', 'N', 'D', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

class Reader {
public:
    Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(v);
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw Error(ErrorCode::SizeMismatch, "checkpoint is truncated");
    }
    const std::string& bytes_;
    std::size_t pos_;
};

} // namespace

std::string checkpoint_bytes(const Model& m) {
    std::string out(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(m.bands()));
    put_u32(out, static_cast<std::uint32_t>(m.k()));
    for (Index i = 0; i < m.k(); ++i)
        for (Index b = 0; b < m.bands(); ++b) put_f64(out, m.w_enc(i, b));
    for (Index i = 0; i < m.k(); ++i) put_f64(out, m.rho(i));
    for (Index i = 0; i < m.k(); ++i) put_f64(out, m.stats.mean(i));
    for (Index i = 0; i < m.k(); ++i) put_f64(out, m.stats.var(i));
    for (Index b = 0; b < m.bands(); ++b)
        for (Index i = 0; i < m.k(); ++i) put_f64(out, m.w_dec(b, i));
    return out;
}

Model model_from_checkpoint_bytes(const std::string& bytes) {
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error(ErrorCode::Io, "not an ENDN checkpoint");
    Reader r(bytes, 4);
    if (r.u32() != kVersion) throw Error(ErrorCode::Io, "unsupported checkpoint version");
    const Index d = r.u32(), k = r.u32();
    if (d < 1 || k < 1) throw Error(ErrorCode::Io, "checkpoint has empty dimensions");
    const std::size_t expected = 16 + 8 * static_cast<std::size_t>(2 * d * k + 3 * k);
    if (bytes.size() != expected) throw Error(ErrorCode::SizeMismatch, "checkpoint size does not match D, K");

    Model m;
    m.w_enc.resize(k, d);
    m.rho.resize(k);
    m.stats.mean.resize(k);
    m.stats.var.resize(k);
    m.w_dec.resize(d, k);
    for (Index i = 0; i < k; ++i)
        for (Index b = 0; b < d; ++b) m.w_enc(i, b) = r.f64();
    for (Index i = 0; i < k; ++i) m.rho(i) = r.f64();
    for (Index i = 0; i < k; ++i) m.stats.mean(i) = r.f64();
    for (Index i = 0; i < k; ++i) m.stats.var(i) = r.f64();
    for (Index b = 0; b < d; ++b)
        for (Index i = 0; i < k; ++i) m.w_dec(b, i) = r.f64();
    m.stats.initialized = true;
    if (!m.w_enc.allFinite() || !m.w_dec.allFinite() || !m.rho.allFinite() ||
        !m.stats.mean.allFinite() || !m.stats.var.allFinite())
        throw Error(ErrorCode::NonFiniteValue, "checkpoint holds non-finite parameters");
    if ((m.stats.var.array() < 0).any())
        throw Error(ErrorCode::Io, "checkpoint running variance is negative");
    return m;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    atomic_write(path, checkpoint_bytes(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
    return model_from_checkpoint_bytes(read_file(path));
}

} // namespace endnet
