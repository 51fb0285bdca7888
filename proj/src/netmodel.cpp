// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/netmodel.hpp"

#include "kstream/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace kstream {

int window_count(int in, int kernel, int stride, int pad) {
    const int span = in + 2 * pad - kernel;
    if (span < 0) {
        throw DimensionError("kernel " + std::to_string(kernel) + " larger than padded input " +
                             std::to_string(in + 2 * pad));
    }
    return span / stride + 1;
}

void validate_layer(const ConvLayerSpec& l) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw DimensionError(what);
    };
    require(l.in_w >= 1 && l.in_h >= 1 && l.in_c >= 1, "input dims must be >= 1");
    require(l.out_c >= 1, "out_c must be >= 1");
    require(l.kernel >= 1, "kernel must be >= 1");
    require(l.stride >= 1, "stride must be >= 1");
    require(l.pad >= 0, "pad must be >= 0");
    require(l.groups >= 1, "groups must be >= 1");
    require(l.in_c % l.groups == 0, "in_c must be divisible by groups");
    require(l.out_c % l.groups == 0, "out_c must be divisible by groups");
    if (l.pool) {
        require(l.pool->kernel == 2 || l.pool->kernel == 3, "pool_kernel must be 2 or 3");
        require(l.pool->stride >= 1 && l.pool->stride <= 3, "pool_stride must be 1..3");
    }
    (void)final_dims(l);
}

Dims3 out_dims(const ConvLayerSpec& l) {
    return {window_count(l.in_w, l.kernel, l.stride, l.pad),
            window_count(l.in_h, l.kernel, l.stride, l.pad), l.out_c};
}

Dims3 final_dims(const ConvLayerSpec& l) {
    Dims3 d = out_dims(l);
    if (l.pool) {
        d.w = window_count(d.w, l.pool->kernel, l.pool->stride, 0);
        d.h = window_count(d.h, l.pool->kernel, l.pool->stride, 0);
    }
    return d;
}

std::uint64_t ops_count(const ConvLayerSpec& l) {
    const Dims3 o = out_dims(l);
    const auto k2 = static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel);
    return 2ULL * o.elements() * static_cast<std::uint64_t>(l.channels_per_group()) * k2;
}

std::uint64_t mem_bytes(const Dims3& d) { return d.elements() * sizeof(std::int16_t); }

std::uint64_t to_kb(std::uint64_t bytes) { return (bytes + 500) / 1000; }

// ---------------------------------------------------------------------------
// Network description text

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct RawLayer {
    int line = 0;
    std::map<std::string, int, std::less<>> values;
};

ConvLayerSpec build_layer(const RawLayer& raw, std::size_t index) {
    const std::string where = "layer " + std::to_string(index + 1);
    auto get = [&](std::string_view key, std::optional<int> fallback) {
        auto it = raw.values.find(key);
        if (it != raw.values.end()) return it->second;
        if (!fallback) throw ParseError(raw.line, where + ": missing key '" + std::string(key) + "'");
        return *fallback;
    };
    ConvLayerSpec l;
    l.in_w = get("in_w", std::nullopt);
    l.in_h = get("in_h", std::nullopt);
    l.in_c = get("in_c", std::nullopt);
    l.out_c = get("out_c", std::nullopt);
    l.kernel = get("kernel", std::nullopt);
    l.stride = get("stride", 1);
    l.pad = get("pad", 0);
    l.groups = get("groups", 1);
    l.has_bias = get("bias", 1) != 0;
    const int pk = get("pool_kernel", 0);
    if (pk != 0) l.pool = PoolSpec{pk, get("pool_stride", pk)};
    try {
        validate_layer(l);
    } catch (const DimensionError& e) {
        throw DimensionError(where + ": " + e.what());
    }
    return l;
}

constexpr std::string_view kLayerKeys[] = {"in_w",   "in_h", "in_c",   "out_c", "kernel",      "stride",
                                           "pad",    "groups", "bias", "pool_kernel", "pool_stride"};

bool known_key(std::string_view k) {
    for (auto key : kLayerKeys)
        if (key == k) return true;
    return false;
}

} // namespace

NetworkSpec parse_network(std::string_view text) {
    NetworkSpec net;
    std::vector<RawLayer> raws;
    enum class Section { None, Network, Layer } section = Section::None;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line == "[layer]") {
                section = Section::Layer;
                raws.push_back(RawLayer{line_no, {}});
            } else if (line == "[network]") {
                section = Section::Network;
            } else {
                throw ParseError(line_no, "unknown section " + std::string(line));
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) throw ParseError(line_no, "expected 'key = value'");

        if (section == Section::Network) {
            if (key != "name") throw ParseError(line_no, "unknown network key '" + std::string(key) + "'");
            net.name = std::string(value);
            continue;
        }
        if (section != Section::Layer) throw ParseError(line_no, "key outside of a [layer] section");
        if (!known_key(key)) throw ParseError(line_no, "unknown layer key '" + std::string(key) + "'");

        int v = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc{} || ptr != value.data() + value.size() || v < 0) {
            throw ParseError(line_no, "'" + std::string(key) + "' needs a non-negative decimal integer");
        }
        auto& values = raws.back().values;
        if (values.contains(key)) throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");
        values.emplace(std::string(key), v);
    }

    if (raws.empty()) throw ParseError(0, "no layers");
    for (std::size_t i = 0; i < raws.size(); ++i) net.layers.push_back(build_layer(raws[i], i));

    for (std::size_t i = 1; i < net.layers.size(); ++i) {
        const Dims3 prev = final_dims(net.layers[i - 1]);
        const auto& l = net.layers[i];
        if (prev != Dims3{l.in_w, l.in_h, l.in_c}) {
            std::ostringstream os;
            os << "layer " << i + 1 << ": input " << l.in_w << "x" << l.in_h << "x" << l.in_c
               << " does not match layer " << i << " output " << prev.w << "x" << prev.h << "x" << prev.c;
            throw DimensionError(os.str());
        }
    }
    return net;
}

NetworkSpec load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open network file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

std::string render_network(const NetworkSpec& net) {
    std::ostringstream os;
    if (!net.name.empty()) os << "[network]\nname = " << net.name << "\n\n";
    for (const auto& l : net.layers) {
        os << "[layer]\n"
           << "in_w = " << l.in_w << "\n"
           << "in_h = " << l.in_h << "\n"
           << "in_c = " << l.in_c << "\n"
           << "out_c = " << l.out_c << "\n"
           << "kernel = " << l.kernel << "\n"
           << "stride = " << l.stride << "\n"
           << "pad = " << l.pad << "\n"
           << "groups = " << l.groups << "\n"
           << "bias = " << (l.has_bias ? 1 : 0) << "\n";
        if (l.pool) os << "pool_kernel = " << l.pool->kernel << "\npool_stride = " << l.pool->stride << "\n";
        os << "\n";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Containers

Tensor3D::Tensor3D(int c, int h, int w)
    : c_(c), h_(h), w_(w), data_(static_cast<std::size_t>(c) * h * w) {
    if (c < 0 || h < 0 || w < 0) throw DimensionError("negative tensor dims");
}

Tensor3D::Tensor3D(int c, int h, int w, std::vector<Fx16> data) : c_(c), h_(h), w_(w), data_(std::move(data)) {
    if (c < 0 || h < 0 || w < 0 || data_.size() != static_cast<std::size_t>(c) * h * w) {
        throw DimensionError("tensor data length does not match dims");
    }
}

FilterSet::FilterSet(int m, int k, int kernel)
    : m_(m), k_(k), kernel_(kernel),
      weights_(static_cast<std::size_t>(m) * k * kernel * kernel), biases_(static_cast<std::size_t>(m)) {}

FilterSet::FilterSet(int m, int k, int kernel, std::vector<Fx16> weights, std::vector<Fx16> biases)
    : m_(m), k_(k), kernel_(kernel), weights_(std::move(weights)), biases_(std::move(biases)) {
    if (weights_.size() != static_cast<std::size_t>(m) * k * kernel * kernel ||
        biases_.size() != static_cast<std::size_t>(m)) {
        throw DimensionError("filter data length does not match dims");
    }
}

void FilterSet::check_matches(const ConvLayerSpec& l) const {
    if (m_ != l.out_c || k_ != l.channels_per_group() || kernel_ != l.kernel) {
        std::ostringstream os;
        os << "filters " << m_ << "x" << k_ << "x" << kernel_ << " do not match layer (" << l.out_c << "x"
           << l.channels_per_group() << "x" << l.kernel << ")";
        throw DimensionError(os.str());
    }
}

// ---------------------------------------------------------------------------
// Binary I/O

namespace {

constexpr char kTensorMagic[4] = {'F', 'X', 'T', '3'};
constexpr char kFilterMagic[4] = {'F', 'X', 'W', '4'};
constexpr std::size_t kHeaderBytes = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_words(std::vector<std::uint8_t>& out, std::span<const Fx16> words) {
    for (Fx16 w : words) {
        const auto u = static_cast<std::uint16_t>(w.bits);
        out.push_back(static_cast<std::uint8_t>(u & 0xFF));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
    return v;
}

std::vector<Fx16> get_words(std::span<const std::uint8_t> b, std::size_t at, std::size_t count) {
    std::vector<Fx16> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto u = static_cast<std::uint16_t>(b[at + 2 * i] | (b[at + 2 * i + 1] << 8));
        out[i] = Fx16::from_bits(static_cast<std::int16_t>(u));
    }
    return out;
}

void check_header(std::span<const std::uint8_t> b, std::size_t at, const char (&magic)[4]) {
    if (b.size() - at < kHeaderBytes) throw IoError("truncated header");
    for (int i = 0; i < 4; ++i) {
        if (b[at + i] != static_cast<std::uint8_t>(magic[i])) {
            throw IoError(std::string("bad magic, expected ") + std::string(magic, 4));
        }
    }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

} // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor3D& t) {
    std::vector<std::uint8_t> out(kTensorMagic, kTensorMagic + 4);
    out.reserve(kHeaderBytes + t.data().size() * 2);
    put_u32(out, static_cast<std::uint32_t>(t.c()));
    put_u32(out, static_cast<std::uint32_t>(t.h()));
    put_u32(out, static_cast<std::uint32_t>(t.w()));
    put_words(out, t.data());
    return out;
}

Tensor3D decode_tensor(std::span<const std::uint8_t> bytes) {
    check_header(bytes, 0, kTensorMagic);
    const std::uint64_t c = get_u32(bytes, 4), h = get_u32(bytes, 8), w = get_u32(bytes, 12);
    const std::uint64_t count = c * h * w;
    if (c > INT32_MAX || h > INT32_MAX || w > INT32_MAX || bytes.size() - kHeaderBytes != count * 2) {
        throw IoError("tensor length mismatch: header says " + std::to_string(count) + " words, payload has " +
                      std::to_string((bytes.size() - kHeaderBytes) / 2));
    }
    return Tensor3D(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w),
                    get_words(bytes, kHeaderBytes, count));
}

void store_tensor(const Tensor3D& t, const std::filesystem::path& path) { write_file(path, encode_tensor(t)); }

Tensor3D load_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    return decode_tensor(bytes);
}

std::vector<std::uint8_t> encode_filters(const FilterSet& f) {
    std::vector<std::uint8_t> out(kFilterMagic, kFilterMagic + 4);
    put_u32(out, static_cast<std::uint32_t>(f.m()));
    put_u32(out, static_cast<std::uint32_t>(f.k()));
    put_u32(out, static_cast<std::uint32_t>(f.kernel()));
    put_words(out, f.weights());
    put_words(out, f.biases());
    return out;
}

std::vector<FilterSet> decode_filters(std::span<const std::uint8_t> bytes) {
    std::vector<FilterSet> out;
    std::size_t at = 0;
    while (at < bytes.size()) {
        check_header(bytes, at, kFilterMagic);
        const std::uint64_t m = get_u32(bytes, at + 4), k = get_u32(bytes, at + 8), kk = get_u32(bytes, at + 12);
        const std::uint64_t nw = m * k * kk * kk;
        const std::uint64_t need = (nw + m) * 2;
        if (m > INT32_MAX || k > INT32_MAX || kk > INT32_MAX || bytes.size() - at - kHeaderBytes < need) {
            throw IoError("filter record " + std::to_string(out.size() + 1) + " length mismatch");
        }
        auto w = get_words(bytes, at + kHeaderBytes, nw);
        auto b = get_words(bytes, at + kHeaderBytes + nw * 2, m);
        out.emplace_back(static_cast<int>(m), static_cast<int>(k), static_cast<int>(kk), std::move(w), std::move(b));
        at += kHeaderBytes + need;
    }
    return out;
}

void store_filters(std::span<const FilterSet> layers, const std::filesystem::path& path) {
    std::vector<std::uint8_t> all;
    for (const auto& f : layers) {
        auto rec = encode_filters(f);
        all.insert(all.end(), rec.begin(), rec.end());
    }
    write_file(path, all);
}

std::vector<FilterSet> load_filters(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.empty()) throw IoError("empty weight file " + path.string());
    return decode_filters(bytes);
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

// mt19937_64 output is fully specified by the standard; distributions are
// not, so values are drawn with plain modular reduction.
class BitSource {
public:
    BitSource(std::uint64_t seed, double range)
        : rng_(seed), limit_(std::max<std::int64_t>(0, to_fx(range).bits)) {}

    Fx16 next() {
        const auto span = static_cast<std::uint64_t>(2 * limit_ + 1);
        return Fx16::from_bits(static_cast<std::int16_t>(static_cast<std::int64_t>(rng_() % span) - limit_));
    }

private:
    std::mt19937_64 rng_;
    std::int64_t limit_;
};

} // namespace

Tensor3D random_tensor(int c, int h, int w, std::uint64_t seed, double range) {
    Tensor3D t(c, h, w);
    BitSource src(seed, range);
    for (auto& v : t.data()) v = src.next();
    return t;
}

FilterSet random_filters(const ConvLayerSpec& l, std::uint64_t seed, double range) {
    FilterSet f(l.out_c, l.channels_per_group(), l.kernel);
    BitSource src(seed, range);
    for (int m = 0; m < f.m(); ++m)
        for (int k = 0; k < f.k(); ++k)
            for (int i = 0; i < f.kernel(); ++i)
                for (int j = 0; j < f.kernel(); ++j) f.weight(m, k, i, j) = src.next();
    if (l.has_bias)
        for (int m = 0; m < f.m(); ++m) f.bias(m) = src.next();
    return f;
}

std::vector<FilterSet> random_network_filters(const NetworkSpec& net, std::uint64_t seed) {
    std::vector<FilterSet> out;
    std::uint64_t s = seed;
    for (const auto& l : net.layers) {
        // Unit-gain uniform range keeps activations away from saturation
        // through deep stacks.
        const double fan_in = static_cast<double>(l.channels_per_group()) * l.kernel * l.kernel;
        out.push_back(random_filters(l, s, std::min(0.25, std::sqrt(3.0 / fan_in))));
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    }
    return out;
}

} // namespace kstream
