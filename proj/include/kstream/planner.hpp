// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Image / feature / kernel decomposition search and command emission.

#include "kstream/datapath.hpp"
#include "kstream/netmodel.hpp"
#include "kstream/tile.hpp"

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kstream {

enum class LoopOrder {
    TilesOuter,     // for tile: for group: input, per-channel weight slices
    FeaturesOuter,  // for group: all weights once; for tile: input
};

std::string to_string(LoopOrder o);

struct Footprint {
    std::uint64_t input_naive = 0;    // ceil partition, no halo
    std::uint64_t input_halo = 0;     // what the tile really needs
    std::uint64_t output = 0;         // convolution output tile, one group
    std::uint64_t weights_group = 0;  // all channels of a group + biases
    std::uint64_t weights_channel = 0;  // one channel slice + biases

    std::uint64_t weights(LoopOrder o) const noexcept {
        return o == LoopOrder::FeaturesOuter ? weights_group : weights_channel;
    }
    std::uint64_t total(LoopOrder o) const noexcept { return input_halo + output + weights(o); }
};

struct Traffic {
    std::uint64_t bytes_in = 0;
    std::uint64_t bytes_out = 0;
    friend bool operator==(const Traffic&, const Traffic&) = default;
};

struct TilePlan {
    int gx = 1;  // column tiles
    int gy = 1;  // row tiles
    int f = 1;   // feature groups
    int s = 1;   // 3x3 sub-kernels per kernel
    LoopOrder order = LoopOrder::FeaturesOuter;
    Dims3 tile_in;    // largest tile input incl. halo
    Dims3 tile_conv;  // largest convolution output tile
    Dims3 tile_out;   // largest final output tile
    Footprint footprint;
    Traffic traffic;

    int tiles() const noexcept { return gx * gy; }
};

/// Input extent for `out_dim` convolution outputs: (out-1)*stride + kernel,
/// clipped to the layer's input size.
int halo_extent(int out_dim, int kernel, int stride, int in_dim);

Footprint tile_footprint(const ConvLayerSpec& l, int gx, int gy, int f);

/// Every step of a split, row-major over tiles then by feature group.
std::vector<TileStep> enumerate_steps(const ConvLayerSpec& l, int gx, int gy, int f);

Traffic dram_traffic(const ConvLayerSpec& l, int gx, int gy, int f, LoopOrder order);
inline Traffic dram_traffic(const TilePlan& p, const ConvLayerSpec& l) {
    return dram_traffic(l, p.gx, p.gy, p.f, p.order);
}

/// Builds the plan for a fixed split, picking the cheaper feasible loop
/// order. Empty when neither order fits `sram_bytes`.
std::optional<TilePlan> evaluate_plan(const ConvLayerSpec& l, int gx, int gy, int f,
                                      std::size_t sram_bytes);

/// Smallest gx*gy*f that fits, ties by DRAM traffic, then smaller f, then
/// (gx, gy). Throws InfeasibleError when nothing fits.
TilePlan plan_layer(const ConvLayerSpec& l, std::size_t sram_bytes = kSramBytes);

// ---------------------------------------------------------------------------
// Commands

enum class Opcode : std::uint8_t {
    LoadImg = 1,
    LoadWt = 2,
    Conv = 3,
    Pool = 4,
    Store = 5,
    Barrier = 6,
};

/// 64-bit control word:
///   [63:56] opcode  [55:44] tile  [43:36] feature group
///   [35:24] channel (0xFFF = all)  [23:0] payload
struct Command {
    static constexpr int kAllChannels = 0xFFF;

    Opcode op = Opcode::Barrier;
    int tile = 0;
    int group = 0;
    int channel = kAllChannels;
    std::uint32_t payload = 0;

    std::uint64_t encode() const;
    static Command decode(std::uint64_t word);

    friend bool operator==(const Command&, const Command&) = default;
};

std::string to_string(const Command& c);

/// Dependency-ordered command stream for one layer under `plan`.
std::vector<Command> emit_commands(const TilePlan& plan, const ConvLayerSpec& l);

/// Independent validator: loads precede convolutions, every (tile, group,
/// channel) is convolved exactly once, pooling sits between the last
/// CONV and the STORE. Returns an empty string when the stream is valid.
std::string check_dependencies(std::span<const Command> cmds, const TilePlan& plan,
                               const ConvLayerSpec& l);

void store_commands(std::span<const Command> cmds, const std::filesystem::path& path);
std::vector<Command> load_commands(const std::filesystem::path& path);

/// 128-deep on-chip command queue refilled from DRAM below the low-water mark.
class CommandFifo {
public:
    static constexpr std::size_t kDepth = 128;
    static constexpr std::size_t kLowWater = 32;

    explicit CommandFifo(std::span<const Command> program);

    bool empty() const noexcept { return queue_.empty() && next_ >= program_.size(); }
    /// Pops the next command; refills first if needed.
    Command pop();
    std::size_t size() const noexcept { return queue_.size(); }
    std::size_t max_size_seen() const noexcept { return max_seen_; }
    std::uint64_t fetched() const noexcept { return fetched_; }
    std::uint64_t refills() const noexcept { return refills_; }

private:
    void refill();

    std::span<const Command> program_;
    std::size_t next_ = 0;
    std::deque<Command> queue_;
    std::size_t max_seen_ = 0;
    std::uint64_t fetched_ = 0;
    std::uint64_t refills_ = 0;
};

/// Decodes and executes a command stream against DRAM-resident tensors.
class Sequencer {
public:
    Sequencer(Accelerator& acc, const ConvLayerSpec& l, const TilePlan& plan);

    /// Runs the program to completion, writing into `output` (final dims).
    void execute(std::span<const Command> program, const Tensor3D& input, const FilterSet& filters,
                 Tensor3D& output);

private:
    const TileStep& step_for(int tile, int group) const;

    Accelerator& acc_;
    ConvLayerSpec layer_;
    TilePlan plan_;
    std::vector<TileStep> steps_;
};

/// Plan, emit and execute one layer. Returns the layer's final output.
struct LayerRun {
    TilePlan plan;
    Tensor3D output;
    PerfCounters counters;
    std::size_t commands = 0;
};
LayerRun execute_layer(const ConvLayerSpec& l, const TilePlan& plan, const Tensor3D& input,
                       const FilterSet& filters, const DatapathConfig& cfg);

} // namespace kstream
