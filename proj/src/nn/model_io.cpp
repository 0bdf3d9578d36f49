#include "ninn/nn/model_io.hpp"

#include "ninn/digest.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ninn::nn {

namespace {

constexpr std::array<char, 8> kMagic{'N', 'I', 'N', 'N', 'M', 'O', 'D', 'L'};
constexpr std::size_t kDigestSize = 32;

class Writer {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    void put(std::uint64_t v, int n) {
        for (int k = 0; k < n; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
    }
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    void raw(char* out, std::size_t n) {
        need(n);
        std::memcpy(out, data_ + at_, n);
        at_ += n;
    }
    [[nodiscard]] bool done() const { return at_ == size_; }

private:
    void need(std::size_t n) const {
        if (size_ - at_ < n) throw CorruptModelError("model file is truncated");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int k = 0; k < n; ++k) v |= static_cast<std::uint64_t>(data_[at_ + static_cast<std::size_t>(k)]) << (8 * k);
        at_ += static_cast<std::size_t>(n);
        return v;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t at_ = 0;
};

// Guards allocation sizes read from untrusted headers.
std::uint64_t bounded(std::uint64_t v, std::uint64_t limit, const char* what) {
    if (v > limit) throw CorruptModelError(std::string("implausible ") + what + " in model header");
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ResNetSystem& system) {
    system.validate();
    Writer w;
    w.raw(kMagic.data(), kMagic.size());
    w.u32(kModelFormatVersion);
    w.u64(static_cast<std::uint64_t>(system.state_dim));
    w.f64(system.dt_step);
    w.u64(system.nets.size());
    for (std::size_t i = 0; i < system.nets.size(); ++i) {
        const auto& net = system.nets[i];
        w.u64(static_cast<std::uint64_t>(net.input_dim()));
        w.u64(static_cast<std::uint64_t>(net.output_dim()));
        w.u64(static_cast<std::uint64_t>(net.depth()));
        w.u64(static_cast<std::uint64_t>(net.width()));
        w.f64(net.tau);
        w.f64(net.activation.epsilon);
        w.u64(system.stencils[i].size());
        for (int idx : system.stencils[i]) w.i64(idx);
        const Vector flat = net.flatten();
        for (Eigen::Index k = 0; k < flat.size(); ++k) w.f64(flat[k]);
    }
    const auto digest = sha256(w.bytes());
    w.bytes().insert(w.bytes().end(), digest.begin(), digest.end());
    return std::move(w.bytes());
}

ResNetSystem decode_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kMagic.size() + 4 + kDigestSize) throw CorruptModelError("model file is truncated");
    if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) throw CorruptModelError("not a model file (bad magic)");

    Reader header(bytes.data() + kMagic.size(), 4);
    const auto version = header.u32();
    if (version != kModelFormatVersion)
        throw ModelVersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                                std::to_string(kModelFormatVersion) + ")");

    const std::size_t body = bytes.size() - kDigestSize;
    const auto digest = sha256(std::span(bytes.data(), body));
    if (!std::equal(digest.begin(), digest.end(), bytes.begin() + static_cast<std::ptrdiff_t>(body)))
        throw CorruptModelError("model checksum mismatch");

    Reader r(bytes.data() + kMagic.size() + 4, body - kMagic.size() - 4);
    ResNetSystem system;
    system.state_dim = static_cast<int>(bounded(r.u64(), 1u << 20, "state_dim"));
    system.dt_step = r.f64();
    const auto count = bounded(r.u64(), 1u << 20, "net count");
    if (count != static_cast<std::uint64_t>(system.state_dim))
        throw ModelDimensionError("model has " + std::to_string(count) + " nets for state_dim " +
                                  std::to_string(system.state_dim));
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto d = static_cast<int>(bounded(r.u64(), 1u << 20, "input_dim"));
        const auto d_star = static_cast<int>(bounded(r.u64(), 1u << 20, "output_dim"));
        const auto depth = static_cast<int>(bounded(r.u64(), 1u << 16, "depth"));
        const auto width = static_cast<int>(bounded(r.u64(), 1u << 16, "width"));
        const double tau = r.f64();
        const double eps = r.f64();
        if (d < 1 || d_star < 1 || depth < 3 || width < 1) throw ModelDimensionError("invalid net dimensions");
        auto net = ResNetParams::zeros(d, d_star, depth, width, tau, ActivationSpec{eps});
        net.tau = tau;
        const auto stencil_len = bounded(r.u64(), 1u << 20, "stencil length");
        if (stencil_len != static_cast<std::uint64_t>(d))
            throw ModelDimensionError("stencil length does not match input_dim for net " + std::to_string(i));
        std::vector<int> stencil;
        for (std::uint64_t k = 0; k < stencil_len; ++k) {
            const auto idx = r.i64();
            if (idx < 0 || idx >= system.state_dim) throw ModelDimensionError("stencil index out of range");
            stencil.push_back(static_cast<int>(idx));
        }
        Vector flat(static_cast<Eigen::Index>(net.parameter_count()));
        for (Eigen::Index k = 0; k < flat.size(); ++k) flat[k] = r.f64();
        net.assign(flat);
        system.nets.push_back(std::move(net));
        system.stencils.push_back(std::move(stencil));
    }
    if (!r.done()) throw CorruptModelError("trailing bytes after model payload");
    try {
        system.validate();
    } catch (const DimensionError& e) {
        throw ModelDimensionError(e.what());
    } catch (const std::invalid_argument& e) {
        throw CorruptModelError(e.what());
    }
    return system;
}

void save_model(const std::filesystem::path& path, const ResNetSystem& system) {
    const auto bytes = encode_model(system);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

ResNetSystem load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_model(bytes);
}

}  // namespace ninn::nn
