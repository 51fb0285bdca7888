// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace kstream {

inline constexpr int kCuEngines = 16;
inline constexpr int kPesPerEngine = 9;
inline constexpr int kPeakMacsPerCycle = kCuEngines * kPesPerEngine;

struct PerfCounters {
    std::uint64_t cycles = 0;
    std::uint64_t macs_executed = 0;
    std::uint64_t sram_reads = 0;  // 16-byte word accesses
    std::uint64_t sram_writes = 0;
    std::uint64_t dram_bytes_in = 0;  // tiles and weights; command fetch excluded
    std::uint64_t dram_bytes_out = 0;
    std::uint64_t stall_cycles = 0;
    std::uint64_t commands_executed = 0;

    std::uint64_t command_bytes = 0;  // command FIFO refills from DRAM
    std::uint64_t weight_prefetches = 0;
    std::uint64_t weight_words_loaded = 0;  // CU weight + bias registers
    std::uint64_t pool_cycles = 0;          // comparator activity, overlaps streaming
    std::uint64_t peak_sram_bytes = 0;

    PerfCounters& operator+=(const PerfCounters& o) noexcept;
    friend PerfCounters operator-(const PerfCounters& a, const PerfCounters& b) noexcept;
    friend bool operator==(const PerfCounters&, const PerfCounters&) = default;
};

inline PerfCounters& PerfCounters::operator+=(const PerfCounters& o) noexcept {
    cycles += o.cycles;
    macs_executed += o.macs_executed;
    sram_reads += o.sram_reads;
    sram_writes += o.sram_writes;
    dram_bytes_in += o.dram_bytes_in;
    dram_bytes_out += o.dram_bytes_out;
    stall_cycles += o.stall_cycles;
    commands_executed += o.commands_executed;
    command_bytes += o.command_bytes;
    weight_prefetches += o.weight_prefetches;
    weight_words_loaded += o.weight_words_loaded;
    pool_cycles += o.pool_cycles;
    peak_sram_bytes = peak_sram_bytes > o.peak_sram_bytes ? peak_sram_bytes : o.peak_sram_bytes;
    return *this;
}

// Peak is a high-water mark, not a sum; the difference keeps `a`'s value.
inline PerfCounters operator-(const PerfCounters& a, const PerfCounters& b) noexcept {
    PerfCounters d;
    d.cycles = a.cycles - b.cycles;
    d.macs_executed = a.macs_executed - b.macs_executed;
    d.sram_reads = a.sram_reads - b.sram_reads;
    d.sram_writes = a.sram_writes - b.sram_writes;
    d.dram_bytes_in = a.dram_bytes_in - b.dram_bytes_in;
    d.dram_bytes_out = a.dram_bytes_out - b.dram_bytes_out;
    d.stall_cycles = a.stall_cycles - b.stall_cycles;
    d.commands_executed = a.commands_executed - b.commands_executed;
    d.command_bytes = a.command_bytes - b.command_bytes;
    d.weight_prefetches = a.weight_prefetches - b.weight_prefetches;
    d.weight_words_loaded = a.weight_words_loaded - b.weight_words_loaded;
    d.pool_cycles = a.pool_cycles - b.pool_cycles;
    d.peak_sram_bytes = a.peak_sram_bytes;
    return d;
}

} // namespace kstream
