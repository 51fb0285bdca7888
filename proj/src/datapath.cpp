// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/datapath.hpp"

#include "kstream/errors.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace kstream {

void DatapathConfig::validate() const {
    if (feature_parallel < 1 || column_parallel < 1 || feature_parallel * column_parallel != kCuEngines) {
        throw Error(ErrorKind::InvalidArgument, "CU mapping F x C must equal 16 (got " +
                                                    std::to_string(feature_parallel) + " x " +
                                                    std::to_string(column_parallel) + ")");
    }
    if (pipeline_depth < 0) throw Error(ErrorKind::InvalidArgument, "pipeline_depth must be >= 0");
    if (sram_bytes < kSramWordBytes) throw Error(ErrorKind::InvalidArgument, "sram_bytes too small");
}

std::size_t words_for_pixels(std::size_t pixels) noexcept {
    return (pixels + kPixelsPerWord - 1) / kPixelsPerWord;
}

int subkernel_count(int kernel) noexcept {
    const int side = (kernel + kSubKernel - 1) / kSubKernel;
    return side * side;
}

// ---------------------------------------------------------------------------
// BufferBank

BufferBank::BufferBank(std::size_t capacity) : capacity_(capacity), storage_(capacity / sizeof(std::int16_t)) {}

std::span<Fx16> BufferBank::allocate(BankSlot slot, std::size_t bytes) {
    auto& target = slots_[static_cast<std::size_t>(slot)];
    target.live = false;
    const std::size_t others = live_bytes();
    if (others + bytes > capacity_) {
        throw CapacityError("buffer bank overflow: " + std::to_string(others + bytes) + " bytes requested, capacity " +
                            std::to_string(capacity_));
    }
    const std::size_t pixels = (bytes + 1) / 2;

    // First fit between the other live slots.
    std::vector<std::pair<std::size_t, std::size_t>> used;
    for (const auto& a : slots_)
        if (a.live) used.emplace_back(a.offset, a.offset + a.pixels);
    std::sort(used.begin(), used.end());
    std::size_t at = 0;
    for (const auto& [b, e] : used) {
        if (b >= at + pixels) break;
        at = std::max(at, e);
    }
    if (at + pixels > storage_.size()) {
        // Pack the live slots to the bottom of the bank, lowest offset first.
        std::array<std::size_t, 3> order{0, 1, 2};
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return slots_[a].offset < slots_[b].offset; });
        at = 0;
        for (std::size_t i : order) {
            auto& a = slots_[i];
            if (!a.live) continue;
            std::copy(storage_.begin() + static_cast<std::ptrdiff_t>(a.offset),
                      storage_.begin() + static_cast<std::ptrdiff_t>(a.offset + a.pixels),
                      storage_.begin() + static_cast<std::ptrdiff_t>(at));
            a.offset = at;
            at += a.pixels;
        }
        if (at + pixels > storage_.size()) {
            throw CapacityError("buffer bank overflow: no room for " + std::to_string(bytes) + " bytes");
        }
    }
    target = {true, at, pixels, bytes};
    peak_ = std::max(peak_, live_bytes());
    auto out = std::span<Fx16>(storage_).subspan(at, pixels);
    std::fill(out.begin(), out.end(), Fx16{});
    return out;
}

void BufferBank::release(BankSlot slot) noexcept { slots_[static_cast<std::size_t>(slot)] = {}; }

bool BufferBank::holds(BankSlot slot) const noexcept { return slots_[static_cast<std::size_t>(slot)].live; }

std::span<Fx16> BufferBank::data(BankSlot slot) noexcept {
    const auto& a = slots_[static_cast<std::size_t>(slot)];
    return std::span<Fx16>(storage_).subspan(a.offset, a.live ? a.pixels : 0);
}

std::span<const Fx16> BufferBank::data(BankSlot slot) const noexcept {
    const auto& a = slots_[static_cast<std::size_t>(slot)];
    return std::span<const Fx16>(storage_).subspan(a.offset, a.live ? a.pixels : 0);
}

void BufferBank::access(std::uint64_t cycle) {
    if (cycle == last_access_) {
        throw SimulationFault("single-port SRAM accessed twice in cycle " + std::to_string(cycle));
    }
    last_access_ = cycle;
}

void BufferBank::check_capacity() const {
    if (live_bytes() > capacity_) throw SimulationFault("buffer bank live bytes exceed capacity");
}

std::size_t BufferBank::live_bytes() const noexcept {
    std::size_t n = 0;
    for (const auto& a : slots_)
        if (a.live) n += a.bytes;
    return n;
}

// ---------------------------------------------------------------------------
// ColumnBuffer

void ColumnBuffer::configure(int row_length, int window_rows, int window_cols) {
    row_length_ = row_length;
    window_rows_ = window_rows;
    window_cols_ = window_cols;
    rows_seen_ = 0;
    current_ = 2;
    for (auto& r : rows_) r.assign(static_cast<std::size_t>(row_length), Fx16{});
}

void ColumnBuffer::begin_row() noexcept {
    current_ = (current_ + 1) % 3;
    ++rows_seen_;
}

void ColumnBuffer::push(int col, Fx16 value) noexcept { rows_[static_cast<std::size_t>(current_)][static_cast<std::size_t>(col)] = value; }

Window ColumnBuffer::window(int col) const noexcept {
    Window w{};
    const int c0 = col - window_cols_ + 1;
    for (int i = 0; i < window_rows_; ++i) {
        const auto& row = rows_[static_cast<std::size_t>((current_ - (window_rows_ - 1) + i + 3) % 3)];
        for (int j = 0; j < window_cols_; ++j) w[static_cast<std::size_t>(i * 3 + j)] = row[static_cast<std::size_t>(c0 + j)];
    }
    return w;
}

int ColumnBuffer::stored_rows() const noexcept { return std::min(rows_seen_ > 0 ? rows_seen_ - 1 : 0, 2); }

// ---------------------------------------------------------------------------
// CU engines

int CuEngine::active_pes() const noexcept { return std::popcount(en_mask); }

Acc48 CuEngine::compute(const Window& w) const noexcept {
    std::int64_t sum = 0;
    for (int pe = 0; pe < kPesPerEngine; ++pe) {
        if (en_mask & (1u << pe)) sum += fx_mul(w[static_cast<std::size_t>(pe)], weights[static_cast<std::size_t>(pe)]).raw;
    }
    return Acc48::from_raw(sum);
}

CuArray::CuArray(int feature_parallel, int column_parallel)
    : features_(feature_parallel), columns_(column_parallel) {}

void CuArray::load_feature(int feature_slot, const std::array<Fx16, 9>& w, Fx16 bias, std::uint16_t mask) {
    for (int c = 0; c < columns_; ++c) {
        auto& e = engine(feature_slot, c);
        e.weights = w;
        e.bias = bias;
        e.en_mask = mask;
    }
}

void CuArray::disable_feature(int feature_slot) {
    for (int c = 0; c < columns_; ++c) engine(feature_slot, c).en_mask = 0;
}

std::uint16_t subkernel_mask(int rows, int cols) noexcept {
    std::uint16_t m = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m |= static_cast<std::uint16_t>(1u << (i * 3 + j));
    return m;
}

// ---------------------------------------------------------------------------
// AccumBuffer

void AccumBuffer::reset(int features, int rows, int cols, std::span<const Fx16> biases) {
    features_ = features;
    rows_ = rows;
    cols_ = cols;
    sums_.assign(static_cast<std::size_t>(features) * rows * cols, Acc48{});
    for (int f = 0; f < features; ++f) {
        const Acc48 b = f < static_cast<int>(biases.size()) ? Acc48::from_fx(biases[static_cast<std::size_t>(f)]) : Acc48{};
        std::fill_n(sums_.begin() + static_cast<std::ptrdiff_t>(f) * rows * cols, rows * cols, b);
    }
}

void AccumBuffer::clear() noexcept {
    features_ = rows_ = cols_ = 0;
    sums_.clear();
}

// ---------------------------------------------------------------------------
// PoolUnit

PoolUnit::PoolUnit(PoolSpec pool, int conv_stride, int valid_row_length)
    : pool_(pool), conv_stride_(conv_stride), row_len_(valid_row_length) {
    if (pool.kernel != 2 && pool.kernel != 3) throw DimensionError("pool kernel must be 2 or 3");
    if (pool.stride < 1) throw DimensionError("pool stride must be >= 1");
    if (conv_stride < 1) throw DimensionError("conv stride must be >= 1");
    if (valid_row_length < pool.kernel) throw DimensionError("pool window wider than the row");
    out_len_ = (valid_row_length - pool.kernel) / pool.stride + 1;
}

std::vector<int> PoolUnit::valid_scratch_rows() const {
    std::vector<int> rows;
    for (int r = 0; r < kScratchRows; ++r)
        if (r % conv_stride_ == 0) rows.push_back(r);
    return rows;
}

std::optional<std::vector<Fx16>> PoolUnit::push(std::span<const Fx16> row) {
    const int dense = dense_rows_++;
    auto& slot = scratch_[static_cast<std::size_t>(dense % kScratchRows)];
    slot.assign(row.begin(), row.end());
    if (dense % conv_stride_ != 0) return std::nullopt;  // multiplexer drops it

    if (static_cast<int>(row.size()) != row_len_) throw DimensionError("pool row length mismatch");
    const int index = valid_rows_++;
    if (index < next_window_) return std::nullopt;  // between windows when stride > kernel
    if (pending_.empty()) pending_first_ = index;
    pending_.push_back(slot);

    if (index != next_window_ + pool_.kernel - 1) return std::nullopt;

    // Comparator: one window column per cycle, the running maximum fed back.
    const auto base = static_cast<std::size_t>(next_window_ - pending_first_);
    std::vector<Fx16> out(static_cast<std::size_t>(out_len_));
    for (int x = 0; x < out_len_; ++x) {
        Fx16 feedback = Fx16::min();
        for (int j = 0; j < pool_.kernel; ++j) {
            const auto col = static_cast<std::size_t>(x * pool_.stride + j);
            Fx16 m = feedback;
            for (int i = 0; i < pool_.kernel; ++i) m = std::max(m, pending_[base + static_cast<std::size_t>(i)][col]);
            feedback = m;
            ++cycles_;
        }
        out[static_cast<std::size_t>(x)] = feedback;
    }

    next_window_ += pool_.stride;
    while (!pending_.empty() && pending_first_ < next_window_) {
        pending_.pop_front();
        ++pending_first_;
    }
    return out;
}

Tensor3D pool_stream(const Tensor3D& conv_out, const PoolSpec& p, int conv_stride) {
    if (p.kernel > conv_out.h()) throw DimensionError("pool window taller than the input");
    const int oh = (conv_out.h() - p.kernel) / p.stride + 1;
    std::vector<Fx16> filler(static_cast<std::size_t>(conv_out.w()));
    Tensor3D out;
    for (int c = 0; c < conv_out.c(); ++c) {
        PoolUnit unit(p, conv_stride, conv_out.w());
        if (c == 0) out = Tensor3D(conv_out.c(), oh, unit.pooled_row_length());
        int py = 0;
        for (int y = 0; y < conv_out.h(); ++y) {
            auto row = conv_out.data().subspan(conv_out.index(c, y, 0), static_cast<std::size_t>(conv_out.w()));
            if (auto pooled = unit.push(row)) {
                std::copy(pooled->begin(), pooled->end(), out.data().begin() + static_cast<std::ptrdiff_t>(out.index(c, py, 0)));
                ++py;
            }
            for (int s = 1; s < conv_stride && y + 1 < conv_out.h(); ++s) unit.push(filler);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Accelerator

Accelerator::Accelerator(DatapathConfig cfg)
    : cfg_(cfg), bank_(cfg.sram_bytes), cus_(cfg.feature_parallel, cfg.column_parallel) {
    cfg_.validate();
}

void Accelerator::tick() {
    ++counters_.cycles;
    bank_.check_capacity();
}

void Accelerator::port_cycle() {
    tick();
    bank_.access(counters_.cycles);
    if (pending_writeback_ > 0) {
        --pending_writeback_;
        ++counters_.sram_writes;
    } else {
        --pending_prefetch_;
        ++counters_.sram_reads;
    }
}

void Accelerator::drain_port() {
    while (pending_writeback_ > 0 || pending_prefetch_ > 0) port_cycle();
}

void Accelerator::configure_layer(const ConvLayerSpec& l, const TileStep& step, WeightResidency residency) {
    validate_layer(l);
    if (pass_.active) throw SimulationFault("reconfigured during a stream pass");
    drain_port();

    const std::size_t feats = static_cast<std::size_t>(step.features.size());
    const std::size_t k2 = static_cast<std::size_t>(l.kernel) * static_cast<std::size_t>(l.kernel);
    const std::size_t in_bytes = static_cast<std::size_t>(step.channels.size()) * step.in.area() * 2;
    const std::size_t out_bytes = feats * step.conv.area() * 2;
    const std::size_t wt_bytes = residency == WeightResidency::Group
                                     ? (feats * static_cast<std::size_t>(l.channels_per_group()) * k2 + feats) * 2
                                     : (feats * k2 + feats) * 2;

    const bool keep_weights = residency == WeightResidency::Group && residency_ == WeightResidency::Group &&
                              bank_.holds(BankSlot::Weights) && layer_ == l && step_.features == step.features;

    bank_.release(BankSlot::Input);
    bank_.release(BankSlot::Output);
    if (!keep_weights) bank_.release(BankSlot::Weights);
    if (in_bytes + out_bytes + wt_bytes > bank_.capacity()) {
        throw CapacityError("tile footprint " + std::to_string(in_bytes + out_bytes + wt_bytes) +
                            " bytes exceeds buffer bank capacity " + std::to_string(bank_.capacity()));
    }

    bank_.allocate(BankSlot::Input, in_bytes);
    bank_.allocate(BankSlot::Output, out_bytes);
    if (!keep_weights) {
        bank_.allocate(BankSlot::Weights, wt_bytes);
        biases_loaded_ = false;
        loaded_slice_channel_ = -1;
    }
    counters_.peak_sram_bytes = std::max<std::uint64_t>(counters_.peak_sram_bytes, bank_.peak_bytes());

    layer_ = l;
    step_ = step;
    residency_ = residency;
    input_loaded_ = false;
    written_back_ = false;
    accum_.clear();
    registers_ = {};
    for (int f = 0; f < cus_.feature_slots(); ++f) cus_.disable_feature(f);
}

int Accelerator::weight_offset(int feature, int channel) const noexcept {
    const int k2 = layer_.kernel * layer_.kernel;
    const int local = feature - step_.features.begin;
    if (residency_ == WeightResidency::Group) {
        const int k = channel - layer_.group_of_feature(feature) * layer_.channels_per_group();
        return (local * layer_.channels_per_group() + k) * k2;
    }
    return local * k2;
}

int Accelerator::bias_offset(int feature) const noexcept {
    const int k2 = layer_.kernel * layer_.kernel;
    const int feats = step_.features.size();
    const int local = feature - step_.features.begin;
    const int weights = residency_ == WeightResidency::Group ? feats * layer_.channels_per_group() * k2 : feats * k2;
    return weights + local;
}

void Accelerator::load_weights(const FilterSet& dram, std::optional<int> channel) {
    dram.check_matches(layer_);
    if (!bank_.holds(BankSlot::Weights)) throw SimulationFault("LOAD_WT without a configured tile");
    auto slot = bank_.data(BankSlot::Weights);
    const int k2 = layer_.kernel * layer_.kernel;
    const int cpg = layer_.channels_per_group();
    std::size_t pixels = 0;

    auto copy_feature = [&](int m, int ch) {
        const int k = ch - layer_.group_of_feature(m) * cpg;
        const auto src = dram.weights().subspan(dram.index(m, k, 0, 0), static_cast<std::size_t>(k2));
        std::copy(src.begin(), src.end(), slot.begin() + weight_offset(m, ch));
        pixels += static_cast<std::size_t>(k2);
    };

    if (!channel) {
        if (residency_ != WeightResidency::Group) throw SimulationFault("group weight load into a channel slice");
        for (int m = step_.features.begin; m < step_.features.end; ++m) {
            const int k0 = layer_.group_of_feature(m) * cpg;
            for (int ch = k0; ch < k0 + cpg; ++ch) copy_feature(m, ch);
        }
    } else {
        if (residency_ != WeightResidency::Channel) throw SimulationFault("channel slice load into group weights");
        if (!step_.channels.contains(*channel)) throw SimulationFault("LOAD_WT for a channel outside the tile");
        for (int m = step_.features.begin; m < step_.features.end; ++m)
            if (layer_.group_of_feature(m) == *channel / cpg) copy_feature(m, *channel);
        loaded_slice_channel_ = *channel;
        registers_ = {};
    }
    if (!biases_loaded_) {
        for (int m = step_.features.begin; m < step_.features.end; ++m)
            slot[static_cast<std::size_t>(bias_offset(m))] = layer_.has_bias ? dram.bias(m) : Fx16{};
        pixels += static_cast<std::size_t>(step_.features.size());
        biases_loaded_ = true;
    }

    const std::size_t words = words_for_pixels(pixels);
    counters_.dram_bytes_in += pixels * 2;
    counters_.sram_writes += words;
    for (std::size_t i = 0; i < words; ++i) {
        tick();
        bank_.access(counters_.cycles);
    }
}

void Accelerator::load_input(const Tensor3D& dram) {
    if (dram.dims() != Dims3{layer_.in_w, layer_.in_h, layer_.in_c}) throw DimensionError("LOAD_IMG source dims mismatch");
    auto slot = bank_.data(BankSlot::Input);
    const auto& in = step_.in;
    std::size_t at = 0;
    for (int ch = step_.channels.begin; ch < step_.channels.end; ++ch) {
        for (int y = in.rows.begin; y < in.rows.end; ++y) {
            const auto src = dram.data().subspan(dram.index(ch, y, in.cols.begin), static_cast<std::size_t>(in.cols.size()));
            std::copy(src.begin(), src.end(), slot.begin() + static_cast<std::ptrdiff_t>(at));
            at += src.size();
        }
    }
    const std::size_t words = words_for_pixels(at);
    counters_.dram_bytes_in += at * 2;
    counters_.sram_writes += words;
    for (std::size_t i = 0; i < words; ++i) {
        tick();
        bank_.access(counters_.cycles);
    }
    input_loaded_ = true;
}

bool Accelerator::prefetch_weights(int first_feature, int count, int channel, int sub) {
    const RegisterTag tag{first_feature, count, channel, sub};
    if (tag == registers_) return false;
    if (count < 1 || count > cus_.feature_slots()) throw SimulationFault("prefetch feature count out of range");
    if (residency_ == WeightResidency::Channel && loaded_slice_channel_ != channel) {
        throw SimulationFault("prefetch of channel " + std::to_string(channel) + " not resident in the bank");
    }
    if (!biases_loaded_) throw SimulationFault("prefetch before LOAD_WT");

    const int side = (layer_.kernel + kSubKernel - 1) / kSubKernel;
    const int p = sub / side, q = sub % side;
    const int kp = std::min(kSubKernel, layer_.kernel - kSubKernel * p);
    const int kq = std::min(kSubKernel, layer_.kernel - kSubKernel * q);
    const auto slot = bank_.data(BankSlot::Weights);

    for (int fs = 0; fs < cus_.feature_slots(); ++fs) {
        if (fs >= count) {
            cus_.disable_feature(fs);
            continue;
        }
        const int m = first_feature + fs;
        if (!step_.features.contains(m) || layer_.group_of_feature(m) != channel / layer_.channels_per_group()) {
            throw SimulationFault("feature " + std::to_string(m) + " does not read channel " + std::to_string(channel));
        }
        std::array<Fx16, 9> w{};
        const int base = weight_offset(m, channel);
        for (int i = 0; i < kp; ++i)
            for (int j = 0; j < kq; ++j)
                w[static_cast<std::size_t>(i * 3 + j)] =
                    slot[static_cast<std::size_t>(base + (kSubKernel * p + i) * layer_.kernel + kSubKernel * q + j)];
        cus_.load_feature(fs, w, slot[static_cast<std::size_t>(bias_offset(m))], subkernel_mask(kp, kq));
    }

    // Bias registers are refreshed with the first sub-kernel of a channel.
    const std::size_t pixels = static_cast<std::size_t>(count) * static_cast<std::size_t>(kp * kq + (sub == 0 ? 1 : 0));
    counters_.weight_words_loaded += pixels;
    ++counters_.weight_prefetches;
    pending_prefetch_ += words_for_pixels(pixels);
    registers_ = tag;
    return true;
}

void Accelerator::ensure_accumulators() {
    if (accum_.active()) return;
    if (!biases_loaded_) throw SimulationFault("CONV before LOAD_WT");
    const int feats = step_.features.size();
    const auto slot = bank_.data(BankSlot::Weights);
    std::vector<Fx16> biases(static_cast<std::size_t>(feats));
    for (int f = 0; f < feats; ++f) biases[static_cast<std::size_t>(f)] = slot[static_cast<std::size_t>(bias_offset(step_.features.begin + f))];
    accum_.reset(feats, step_.conv.rows.size(), step_.conv.cols.size(), biases);
    pending_prefetch_ += words_for_pixels(static_cast<std::size_t>(feats));  // bias injector read
}

void Accelerator::conv_channel(int channel) {
    if (!input_loaded_) throw SimulationFault("CONV before LOAD_IMG");
    if (!step_.channels.contains(channel)) throw SimulationFault("CONV on a channel outside the tile");
    ensure_accumulators();

    const int cpg = layer_.channels_per_group();
    const int fpg = layer_.features_per_group();
    const int g = channel / cpg;
    const int f0 = std::max(step_.features.begin, g * fpg);
    const int f1 = std::min(step_.features.end, (g + 1) * fpg);
    const int subs = subkernel_count(layer_.kernel);
    const int slots = cus_.feature_slots();

    for (int first = f0; first < f1; first += slots) {
        const int count = std::min(slots, f1 - first);
        for (int sub = 0; sub < subs; ++sub) {
            prefetch_weights(first, count, channel, sub);
            begin_pass(channel, sub);
            while (pass_.active) stream_cycle();
        }
    }
    written_back_ = false;
}

void Accelerator::begin_pass(int channel, int sub) {
    if (registers_.channel != channel || registers_.sub != sub) throw SimulationFault("stream pass without matching prefetch");
    ensure_accumulators();
    const int side = (layer_.kernel + kSubKernel - 1) / kSubKernel;
    const int p = sub / side, q = sub % side;
    const int a = layer_.stride;

    Pass ps;
    ps.active = true;
    ps.channel = channel;
    ps.kp = std::min(kSubKernel, layer_.kernel - kSubKernel * p);
    ps.kq = std::min(kSubKernel, layer_.kernel - kSubKernel * q);
    ps.row0 = step_.conv.rows.begin * a + kSubKernel * p - layer_.pad;
    ps.col0 = step_.conv.cols.begin * a + kSubKernel * q - layer_.pad;
    ps.rows = a * (step_.conv.rows.size() - 1) + ps.kp;
    ps.width = a * (step_.conv.cols.size() - 1) + ps.kq;
    ps.chunks = (ps.width + cfg_.pixels_per_cycle() - 1) / cfg_.pixels_per_cycle();
    ps.first_feature = registers_.first_feature;
    ps.features = registers_.count;
    pass_ = ps;
    colbuf_.configure(ps.width, ps.kp, ps.kq);
}

Fx16 Accelerator::input_pixel(int channel, int row, int col) const noexcept {
    if (row < 0 || row >= layer_.in_h || col < 0 || col >= layer_.in_w) return Fx16{};  // padding
    const auto& in = step_.in;
    const std::size_t idx = (static_cast<std::size_t>(channel - step_.channels.begin) * in.rows.size() +
                             static_cast<std::size_t>(row - in.rows.begin)) *
                                static_cast<std::size_t>(in.cols.size()) +
                            static_cast<std::size_t>(col - in.cols.begin);
    return bank_.data(BankSlot::Input)[idx];
}

CycleResult Accelerator::stream_cycle() {
    CycleResult r;
    if (!pass_.active) return r;

    // Writeback and weight fetch win the single port; the stream waits.
    if (pending_writeback_ > 0 || pending_prefetch_ > 0) {
        port_cycle();
        ++counters_.stall_cycles;
        r.stalled = true;
        return r;
    }

    tick();
    Pass& ps = pass_;
    const int ppc = cfg_.pixels_per_cycle();
    const int c_begin = ps.chunk * ppc;
    const int c_end = std::min(ps.width, c_begin + ppc);
    const int row = ps.row0 + ps.row;

    const bool row_in = row >= 0 && row < layer_.in_h;
    const bool cols_in = ps.col0 + c_end > 0 && ps.col0 + c_begin < layer_.in_w;
    if (row_in && cols_in) {
        bank_.access(counters_.cycles);
        ++counters_.sram_reads;
    }

    if (ps.chunk == 0) colbuf_.begin_row();
    const int a = layer_.stride;
    const int wr = ps.row - ps.kp + 1;
    const bool row_enabled = wr >= 0 && wr % a == 0;
    const int feature_base = ps.first_feature - step_.features.begin;

    for (int v = c_begin; v < c_end; ++v) {
        colbuf_.push(v, row_in ? input_pixel(ps.channel, row, ps.col0 + v) : Fx16{});
        if (!row_enabled || !colbuf_.window_ready(v)) continue;
        const int wc = v - ps.kq + 1;
        if (wc % a != 0) continue;  // EN_Ctrl gates this column for stride > 1
        const Window win = colbuf_.window(v);
        const int slot = v - c_begin;
        for (int fs = 0; fs < ps.features; ++fs) {
            const CuEngine& e = cus_.engine(fs, slot);
            accum_.add(feature_base + fs, wr / a, wc / a, e.compute(win));
            r.macs += e.active_pes();
            ++r.windows;
        }
    }
    counters_.macs_executed += static_cast<std::uint64_t>(r.macs);

    if (++ps.chunk == ps.chunks) {
        ps.chunk = 0;
        if (++ps.row == ps.rows) {
            ps.active = false;
            for (int i = 0; i < cfg_.pipeline_depth; ++i) tick();
        }
    }
    return r;
}

void Accelerator::writeback(bool pool) {
    if (!accum_.active()) throw SimulationFault("writeback with no accumulated results");
    if (pool && !layer_.pool) throw SimulationFault("POOL on a layer without pooling");
    auto slot = bank_.data(BankSlot::Output);
    const int feats = accum_.features();
    const int rows = accum_.rows(), cols = accum_.cols();
    std::size_t written = 0;

    std::vector<Fx16> row(static_cast<std::size_t>(cols));
    if (pool) {
        const int orow = step_.out.rows.size(), ocol = step_.out.cols.size();
        const std::vector<Fx16> filler(static_cast<std::size_t>(cols));
        for (int f = 0; f < feats; ++f) {
            PoolUnit unit(*layer_.pool, layer_.stride, cols);
            int py = 0;
            for (int y = 0; y < rows; ++y) {
                for (int x = 0; x < cols; ++x) row[static_cast<std::size_t>(x)] = quantize(accum_.at(f, y, x));
                if (auto pooled = unit.push(row)) {
                    if (py >= orow || static_cast<int>(pooled->size()) != ocol) throw SimulationFault("pooled tile shape mismatch");
                    std::copy(pooled->begin(), pooled->end(), slot.begin() + (static_cast<std::ptrdiff_t>(f) * orow + py) * ocol);
                    ++py;
                }
                for (int s = 1; s < layer_.stride && y + 1 < rows; ++s) unit.push(filler);
            }
            if (py != orow) throw SimulationFault("pooled tile shape mismatch");
            counters_.pool_cycles += unit.comparator_cycles();
            written += static_cast<std::size_t>(orow) * static_cast<std::size_t>(ocol);
        }
        written_region_ = step_.out;
    } else {
        for (int f = 0; f < feats; ++f)
            for (int y = 0; y < rows; ++y)
                for (int x = 0; x < cols; ++x)
                    slot[(static_cast<std::size_t>(f) * rows + y) * cols + x] = quantize(accum_.at(f, y, x));
        written = static_cast<std::size_t>(feats) * rows * cols;
        written_region_ = step_.conv;
    }
    pending_writeback_ += words_for_pixels(written);
    accum_.clear();
    written_back_ = true;
}

Tensor3D Accelerator::output_tile() const {
    if (!written_back_) throw SimulationFault("output tile read before writeback");
    const int feats = step_.features.size();
    const int rows = written_region_.rows.size(), cols = written_region_.cols.size();
    const auto slot = bank_.data(BankSlot::Output);
    std::vector<Fx16> data(slot.begin(), slot.begin() + static_cast<std::ptrdiff_t>(feats) * rows * cols);
    return Tensor3D(feats, rows, cols, std::move(data));
}

void Accelerator::store_output(Tensor3D& dram) {
    if (!written_back_) {
        if (layer_.pool) throw SimulationFault("STORE of a pooled layer before POOL");
        writeback(false);
    }
    drain_port();
    const Tensor3D tile = output_tile();
    const Dims3 fin = final_dims(layer_);
    if (dram.dims() != fin) throw DimensionError("STORE target dims mismatch");
    if (written_region_ != step_.out) throw SimulationFault("stored region differs from the tile's output region");

    for (int f = 0; f < tile.c(); ++f)
        for (int y = 0; y < tile.h(); ++y)
            std::copy_n(tile.data().begin() + static_cast<std::ptrdiff_t>(tile.index(f, y, 0)), tile.w(),
                        dram.data().begin() + static_cast<std::ptrdiff_t>(dram.index(step_.features.begin + f,
                                                                                     step_.out.rows.begin + y,
                                                                                     step_.out.cols.begin)));

    const std::size_t pixels = tile.data().size();
    const std::size_t words = words_for_pixels(pixels);
    counters_.sram_reads += words;
    counters_.dram_bytes_out += pixels * 2;
    for (std::size_t i = 0; i < words; ++i) {
        tick();
        bank_.access(counters_.cycles);
    }
    bank_.release(BankSlot::Input);
    bank_.release(BankSlot::Output);
    if (residency_ == WeightResidency::Channel) release_weights();
    input_loaded_ = false;
}

void Accelerator::release_weights() noexcept {
    bank_.release(BankSlot::Weights);
    biases_loaded_ = false;
    loaded_slice_channel_ = -1;
    registers_ = {};
}

void Accelerator::add_command_fetch(std::uint64_t commands) noexcept { counters_.command_bytes += commands * 8; }

// ---------------------------------------------------------------------------

TileResult run_tile(Accelerator& acc, const Tensor3D& input, const FilterSet& weights, const ConvLayerSpec& l,
                    const TileStep& step) {
    const PerfCounters before = acc.counters();
    WeightResidency residency = WeightResidency::Group;
    try {
        acc.configure_layer(l, step, residency);
    } catch (const CapacityError&) {
        residency = WeightResidency::Channel;
        acc.configure_layer(l, step, residency);
    }

    if (residency == WeightResidency::Group) acc.load_weights(weights, std::nullopt);
    acc.load_input(input);
    for (int ch = step.channels.begin; ch < step.channels.end; ++ch) {
        if (residency == WeightResidency::Channel) acc.load_weights(weights, ch);
        acc.conv_channel(ch);
    }
    acc.writeback(l.pool.has_value());

    Tensor3D out = acc.output_tile();
    Tensor3D sink(final_dims(l).c, final_dims(l).h, final_dims(l).w);
    acc.store_output(sink);
    acc.release_weights();
    return {std::move(out), acc.counters() - before};
}

} // namespace kstream
