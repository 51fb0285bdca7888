// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Cycle-approximate model of the streaming convolution datapath:
// single-port buffer bank -> column buffer -> 16 CU engines -> accumulation
// buffer -> pooling unit -> buffer bank.

#include "kstream/counters.hpp"
#include "kstream/netmodel.hpp"
#include "kstream/tile.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace kstream {

inline constexpr std::size_t kSramBytes = 128 * 1024;
inline constexpr std::size_t kSramWordBytes = 16;
inline constexpr int kPixelsPerWord = static_cast<int>(kSramWordBytes / sizeof(std::int16_t));
inline constexpr int kSubKernel = 3;

struct DatapathConfig {
    int feature_parallel = 2;  // F
    int column_parallel = 8;   // C, F * C == 16
    std::size_t sram_bytes = kSramBytes;
    int pipeline_depth = 3;  // fill/drain cycles added to every stream pass

    int pixels_per_cycle() const noexcept {
        return column_parallel < kPixelsPerWord ? column_parallel : kPixelsPerWord;
    }
    /// Throws InvalidArgument-kind Error unless F * C == 16.
    void validate() const;
};

/// Bytes for a span of 16-bit words rounded up to whole bank words.
std::size_t words_for_pixels(std::size_t pixels) noexcept;

enum class BankSlot { Input = 0, Output = 1, Weights = 2 };

/// The on-chip single-port SRAM. Holds the resident input tile, output
/// tile and weights; at most one port access per cycle.
class BufferBank {
public:
    explicit BufferBank(std::size_t capacity = kSramBytes);

    /// Reserves `bytes` for `slot` (replacing a previous allocation of that
    /// slot). Throws CapacityError when the live total would exceed capacity.
    std::span<Fx16> allocate(BankSlot slot, std::size_t bytes);
    void release(BankSlot slot) noexcept;
    bool holds(BankSlot slot) const noexcept;

    std::span<Fx16> data(BankSlot slot) noexcept;
    std::span<const Fx16> data(BankSlot slot) const noexcept;

    /// Registers the single port access of `cycle`; a second access in the
    /// same cycle is a simulation fault.
    void access(std::uint64_t cycle);
    /// Capacity invariant, checked every simulated cycle.
    void check_capacity() const;

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t live_bytes() const noexcept;
    std::size_t peak_bytes() const noexcept { return peak_; }

private:
    struct Allocation {
        bool live = false;
        std::size_t offset = 0;  // in pixels
        std::size_t pixels = 0;
        std::size_t bytes = 0;
    };

    std::size_t capacity_;
    std::vector<Fx16> storage_;
    std::array<Allocation, 3> slots_{};
    std::size_t peak_ = 0;
    std::uint64_t last_access_ = UINT64_MAX;
};

/// 3x3 neighbourhood handed to a CU engine, [row][col].
using Window = std::array<Fx16, 9>;

/// Sliding-window former. Keeps the two previous rows of the stream
/// (2 x N storage) plus the row being shifted in.
class ColumnBuffer {
public:
    void configure(int row_length, int window_rows, int window_cols);
    void begin_row() noexcept;
    void push(int col, Fx16 value) noexcept;
    /// True once (window_rows - 1) full rows plus window_cols pixels of the
    /// current row have arrived for the window ending at `col`.
    bool window_ready(int col) const noexcept {
        return rows_seen_ >= window_rows_ && col >= window_cols_ - 1;
    }
    /// Window whose bottom-right pixel is (current row, col).
    Window window(int col) const noexcept;

    int row_length() const noexcept { return row_length_; }
    /// Completed rows retained for window forming (never more than 2).
    int stored_rows() const noexcept;

private:
    int row_length_ = 0;
    int window_rows_ = kSubKernel;
    int window_cols_ = kSubKernel;
    int rows_seen_ = 0;  // including the current one
    int current_ = 0;
    std::array<std::vector<Fx16>, 3> rows_;
};

/// One convolutional unit: 9 multiplier PEs, weight registers, EN_Ctrl mask
/// and the output adder.
struct CuEngine {
    std::array<Fx16, 9> weights{};
    Fx16 bias{};
    std::uint16_t en_mask = 0;  // bit i*3+j enables PE (i, j)

    int active_pes() const noexcept;
    /// Sum of enabled products; disabled PEs contribute exactly zero.
    Acc48 compute(const Window& w) const noexcept;
};

/// 16 CU engines mapped as F feature slots x C column slots.
class CuArray {
public:
    explicit CuArray(int feature_parallel = 2, int column_parallel = 8);

    int feature_slots() const noexcept { return features_; }
    int column_slots() const noexcept { return columns_; }
    CuEngine& engine(int feature_slot, int column_slot) noexcept {
        return engines_[static_cast<std::size_t>(feature_slot * columns_ + column_slot)];
    }
    const CuEngine& engine(int feature_slot, int column_slot) const noexcept {
        return engines_[static_cast<std::size_t>(feature_slot * columns_ + column_slot)];
    }
    /// Broadcasts one weight set to every column slot of a feature slot.
    void load_feature(int feature_slot, const std::array<Fx16, 9>& w, Fx16 bias, std::uint16_t mask);
    void disable_feature(int feature_slot);

private:
    int features_;
    int columns_;
    std::array<CuEngine, kCuEngines> engines_{};
};

/// EN_Ctrl PE mask for a sub-kernel of `rows` x `cols` valid taps.
std::uint16_t subkernel_mask(int rows, int cols) noexcept;

/// Partial sums for the in-flight output tile, one plane per feature.
class AccumBuffer {
public:
    void reset(int features, int rows, int cols, std::span<const Fx16> biases);
    void add(int feature, int y, int x, Acc48 v) {
        auto& slot = sums_[index(feature, y, x)];
        slot = acc_add(slot, v);
    }
    Acc48 at(int feature, int y, int x) const noexcept { return sums_[index(feature, y, x)]; }
    int features() const noexcept { return features_; }
    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    bool active() const noexcept { return features_ > 0; }
    void clear() noexcept;

private:
    std::size_t index(int f, int y, int x) const noexcept {
        return (static_cast<std::size_t>(f) * rows_ + y) * cols_ + x;
    }
    int features_ = 0;
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Acc48> sums_;
};

/// Streaming max pooling block: scratchpad rows R0..R7 sharing one column
/// address, a validity multiplexer driven by the convolution stride, and a
/// four-input comparator with a feedback register. Rows pushed are the
/// dense (stride-1) result rows of one feature; with conv stride s only
/// rows whose index is a multiple of s carry valid data.
class PoolUnit {
public:
    static constexpr int kScratchRows = 8;

    PoolUnit(PoolSpec pool, int conv_stride, int valid_row_length);

    /// Pushes one dense row. Returns a pooled row once a full window has
    /// been seen; incomplete windows wait in the internal buffer.
    std::optional<std::vector<Fx16>> push(std::span<const Fx16> row);

    std::uint64_t comparator_cycles() const noexcept { return cycles_; }
    int pooled_row_length() const noexcept { return out_len_; }
    /// Scratchpad slots whose data the multiplexer forwards.
    std::vector<int> valid_scratch_rows() const;

private:
    PoolSpec pool_;
    int conv_stride_;
    int row_len_;
    int out_len_;
    int dense_rows_ = 0;
    int valid_rows_ = 0;      // valid rows accepted so far
    int next_window_ = 0;     // first valid row index of the next window
    std::array<std::vector<Fx16>, kScratchRows> scratch_;
    std::deque<std::vector<Fx16>> pending_;  // internal buffer
    int pending_first_ = 0;                  // valid row index of pending_.front()
    std::uint64_t cycles_ = 0;
};

/// Reference-free convenience: pools a whole tensor by streaming every
/// channel through a PoolUnit.
Tensor3D pool_stream(const Tensor3D& conv_out, const PoolSpec& p, int conv_stride);

/// How the weights of a feature group live in the buffer bank.
enum class WeightResidency {
    Group,    // every channel of the group resident for all tiles
    Channel,  // one input channel's slice at a time
};

struct CycleResult {
    bool stalled = false;
    int windows = 0;  // enabled CU results produced
    int macs = 0;
};

/// The accelerator instance. Single-threaded; one per simulation.
class Accelerator {
public:
    explicit Accelerator(DatapathConfig cfg = {});

    const DatapathConfig& config() const noexcept { return cfg_; }
    const PerfCounters& counters() const noexcept { return counters_; }
    const BufferBank& bank() const noexcept { return bank_; }
    const ColumnBuffer& column_buffer() const noexcept { return colbuf_; }
    const CuArray& cu_array() const noexcept { return cus_; }
    const TileStep& step() const noexcept { return step_; }

    /// Checks tile footprints against the bank and sets up the column
    /// buffer and EN_Ctrl stride gating. Throws CapacityError if the tile
    /// does not fit.
    void configure_layer(const ConvLayerSpec& l, const TileStep& step, WeightResidency residency);

    /// LOAD_WT. `channel` empty loads every channel of the step's features
    /// (Group residency); otherwise one slice. Biases travel with the
    /// first channel of the group.
    void load_weights(const FilterSet& dram, std::optional<int> channel);
    /// LOAD_IMG: the step's input halo region, required channels only.
    void load_input(const Tensor3D& dram);

    /// Loads CU weight registers for features [first, first + count) of
    /// `channel`, sub-kernel `sub`. Returns false (no traffic) when those
    /// registers already hold exactly this selection.
    bool prefetch_weights(int first_feature, int count, int channel, int sub);

    /// CONV for one input channel: every feature chunk that reads it, every
    /// sub-kernel.
    void conv_channel(int channel);

    /// Arms one stream pass; prefetch must have been issued.
    void begin_pass(int channel, int sub);
    bool pass_active() const noexcept { return pass_.active; }
    CycleResult stream_cycle();

    /// Quantizes the accumulators (through the pooling unit when `pool`)
    /// into the output slot of the bank.
    void writeback(bool pool);
    bool written_back() const noexcept { return written_back_; }
    /// STORE: moves the output slot to DRAM and releases tile storage.
    void store_output(Tensor3D& dram);
    /// Output slot contents as a tensor in final coordinates of the tile.
    Tensor3D output_tile() const;

    /// Drops weight storage between feature groups.
    void release_weights() noexcept;
    void add_command_fetch(std::uint64_t commands) noexcept;
    void count_command() noexcept { ++counters_.commands_executed; }

private:
    struct Pass {
        bool active = false;
        int channel = 0;
        int kp = 3, kq = 3;            // valid sub-kernel taps
        int row0 = 0, col0 = 0;        // global input coords of stream origin
        int rows = 0, width = 0;       // virtual stream extent
        int row = 0, chunk = 0, chunks = 0;
        int first_feature = 0, features = 0;
    };

    void tick();
    void port_cycle();
    void drain_port();
    void ensure_accumulators();
    int weight_offset(int feature, int channel) const noexcept;
    int bias_offset(int feature) const noexcept;
    Fx16 input_pixel(int channel, int row, int col) const noexcept;

    DatapathConfig cfg_;
    BufferBank bank_;
    ColumnBuffer colbuf_;
    CuArray cus_;
    AccumBuffer accum_;
    PerfCounters counters_;

    ConvLayerSpec layer_;
    TileStep step_;
    WeightResidency residency_ = WeightResidency::Group;
    int loaded_slice_channel_ = -1;
    bool biases_loaded_ = false;
    bool input_loaded_ = false;
    bool written_back_ = false;
    Region written_region_;  // final-coordinate extent of the output slot

    struct RegisterTag {
        int first_feature = -1, count = 0, channel = -1, sub = -1;
        friend bool operator==(const RegisterTag&, const RegisterTag&) = default;
    } registers_;

    std::uint64_t pending_writeback_ = 0;  // port words queued, highest priority
    std::uint64_t pending_prefetch_ = 0;
    Pass pass_;
};

/// Runs one tile end to end (weights, input, every channel, optional
/// pooling, store) and returns the tile's output in final coordinates.
struct TileResult {
    Tensor3D output;
    PerfCounters delta;
};
TileResult run_tile(Accelerator& acc, const Tensor3D& input, const FilterSet& weights,
                    const ConvLayerSpec& l, const TileStep& step);

/// Number of 3x3 sub-kernels a K x K kernel is split into: ceil(K/3)^2.
int subkernel_count(int kernel) noexcept;

} // namespace kstream
