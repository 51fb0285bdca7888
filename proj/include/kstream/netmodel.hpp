// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kstream/fxp.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kstream {

/// Max pooling window applied after a convolution. No padding.
struct PoolSpec {
    int kernel = 2;
    int stride = 2;

    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct Dims3 {
    int w = 0;
    int h = 0;
    int c = 0;

    std::size_t elements() const noexcept {
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c);
    }
    friend bool operator==(const Dims3&, const Dims3&) = default;
};

struct ConvLayerSpec {
    int in_w = 0;
    int in_h = 0;
    int in_c = 0;
    int out_c = 0;
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    int groups = 1;
    bool has_bias = true;
    std::optional<PoolSpec> pool;

    int channels_per_group() const noexcept { return in_c / groups; }
    int features_per_group() const noexcept { return out_c / groups; }
    /// Convolution group that output feature `m` belongs to.
    int group_of_feature(int m) const noexcept { return m / features_per_group(); }

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct NetworkSpec {
    std::string name;
    std::vector<ConvLayerSpec> layers;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Throws DimensionError if the layer breaks a geometry invariant.
void validate_layer(const ConvLayerSpec& l);

/// Convolution output dims (before pooling).
Dims3 out_dims(const ConvLayerSpec& l);
/// Dims after the optional pooling stage; equals out_dims without pooling.
Dims3 final_dims(const ConvLayerSpec& l);
/// Sliding-window output length for one axis; throws if it would be < 1.
int window_count(int in, int kernel, int stride, int pad);

/// Multiply and add each count as one op; grouping respected.
std::uint64_t ops_count(const ConvLayerSpec& l);
std::uint64_t mem_bytes(const Dims3& d);
/// Bytes to report-KB, 1000-byte convention, round half up.
std::uint64_t to_kb(std::uint64_t bytes);

NetworkSpec parse_network(std::string_view text);
NetworkSpec load_network(const std::filesystem::path& path);
std::string render_network(const NetworkSpec& net);

/// Feature map, [channel][row][col] row-major.
class Tensor3D {
public:
    Tensor3D() = default;
    Tensor3D(int c, int h, int w);
    Tensor3D(int c, int h, int w, std::vector<Fx16> data);

    int c() const noexcept { return c_; }
    int h() const noexcept { return h_; }
    int w() const noexcept { return w_; }
    Dims3 dims() const noexcept { return {w_, h_, c_}; }

    std::size_t index(int ch, int y, int x) const noexcept {
        return (static_cast<std::size_t>(ch) * h_ + y) * w_ + x;
    }
    Fx16 at(int ch, int y, int x) const noexcept { return data_[index(ch, y, x)]; }
    Fx16& at(int ch, int y, int x) noexcept { return data_[index(ch, y, x)]; }

    std::span<const Fx16> data() const noexcept { return data_; }
    std::span<Fx16> data() noexcept { return data_; }

    friend bool operator==(const Tensor3D&, const Tensor3D&) = default;

private:
    int c_ = 0;
    int h_ = 0;
    int w_ = 0;
    std::vector<Fx16> data_;
};

/// Weights W[m][k][i][j] and biases B[m] of one layer; k runs over the
/// input channels of m's group.
class FilterSet {
public:
    FilterSet() = default;
    FilterSet(int m, int k, int kernel);
    FilterSet(int m, int k, int kernel, std::vector<Fx16> weights, std::vector<Fx16> biases);

    int m() const noexcept { return m_; }
    int k() const noexcept { return k_; }
    int kernel() const noexcept { return kernel_; }

    std::size_t index(int m, int k, int i, int j) const noexcept {
        return ((static_cast<std::size_t>(m) * k_ + k) * kernel_ + i) * kernel_ + j;
    }
    Fx16 weight(int m, int k, int i, int j) const noexcept { return weights_[index(m, k, i, j)]; }
    Fx16& weight(int m, int k, int i, int j) noexcept { return weights_[index(m, k, i, j)]; }
    Fx16 bias(int m) const noexcept { return biases_[static_cast<std::size_t>(m)]; }
    Fx16& bias(int m) noexcept { return biases_[static_cast<std::size_t>(m)]; }

    std::span<const Fx16> weights() const noexcept { return weights_; }
    std::span<const Fx16> biases() const noexcept { return biases_; }

    /// Throws DimensionError unless shaped for `l`.
    void check_matches(const ConvLayerSpec& l) const;

    friend bool operator==(const FilterSet&, const FilterSet&) = default;

private:
    int m_ = 0;
    int k_ = 0;
    int kernel_ = 0;
    std::vector<Fx16> weights_;
    std::vector<Fx16> biases_;
};

// Binary formats: little-endian, 16-byte header.
//   tensor:  "FXT3" c h w (u32) then c*h*w i16 words
//   filters: "FXW4" m k K (u32) then m*k*K*K weight words, m bias words
// A network weight file is the concatenation of one filter record per layer.
void store_tensor(const Tensor3D& t, const std::filesystem::path& path);
Tensor3D load_tensor(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const Tensor3D& t);
Tensor3D decode_tensor(std::span<const std::uint8_t> bytes);

void store_filters(std::span<const FilterSet> layers, const std::filesystem::path& path);
std::vector<FilterSet> load_filters(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_filters(const FilterSet& f);
/// Decodes consecutive filter records until the buffer is exhausted.
std::vector<FilterSet> decode_filters(std::span<const std::uint8_t> bytes);

/// Deterministic synthetic data. Values are drawn from [-range, range]
/// Q8.8 bit patterns using a 64-bit Mersenne twister seeded with `seed`.
Tensor3D random_tensor(int c, int h, int w, std::uint64_t seed, double range = 2.0);
FilterSet random_filters(const ConvLayerSpec& l, std::uint64_t seed, double range = 0.25);
std::vector<FilterSet> random_network_filters(const NetworkSpec& net, std::uint64_t seed);

} // namespace kstream
