// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kstream/counters.hpp"
#include "kstream/netmodel.hpp"
#include "kstream/planner.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kstream {

/// Clock and power operating point. Power is a configuration input taken
/// from silicon measurements, never computed here.
struct PowerProfile {
    double freq_mhz = 500.0;
    double power_mw = 425.0;  // <= 0 means unknown
    // Optional per-event energies for a breakdown estimate.
    std::optional<double> pj_per_mac;
    std::optional<double> pj_per_sram_word;
    std::optional<double> pj_per_dram_byte;
};

inline constexpr double kMinFreqMhz = 20.0;
inline constexpr double kMaxFreqMhz = 500.0;

/// Measured operating points of the prototype chip:
///   20 MHz @ 0.6 V  ->   7 mW
///  500 MHz @ 1.0 V  -> 425 mW
/// Other frequencies get an unknown power.
PowerProfile measured_profile(double freq_mhz);

/// Non-empty when the frequency is outside the measured 20..500 MHz range.
std::optional<std::string> envelope_warning(const PowerProfile& p);

struct Throughput {
    double achieved_gops = 0.0;
    double peak_gops = 0.0;
    double utilization = 0.0;
};

double peak_gops(double freq_mhz);
/// One MAC counts as two ops. Requires counters.cycles > 0.
Throughput gops(const PerfCounters& c, double freq_mhz);
/// GOPS / mW == TOPS/W. Zero when power is unknown.
double energy_efficiency(double gops, const PowerProfile& p);
/// Sum of per-event energies in microjoules; empty unless every
/// coefficient is set.
std::optional<double> event_energy_uj(const PerfCounters& c, const PowerProfile& p);

struct LayerRecord {
    ConvLayerSpec layer;
    TilePlan plan;
    std::optional<PerfCounters> counters;  // empty in plan-only mode
};

struct RunRecord {
    std::string network;
    PowerProfile profile;
    std::vector<LayerRecord> layers;

    bool simulated() const noexcept;
    PerfCounters totals() const;
};

enum class ReportFormat { Text, Csv };

/// Per-layer summary: dims, ops, memory (1000-byte KB), plan, cycles,
/// achieved GOPS, DRAM traffic, plus a totals row.
std::string render_report(const RunRecord& run, ReportFormat fmt);
/// Planner CSV: layer,gx,gy,f,s,in_naive_B,in_halo_B,out_B,wt_B,dram_in_B,dram_out_B,loop_order
std::string render_plan_csv(const RunRecord& run);

/// "211M" / "1.3G" style rendering used in the text report.
std::string humanize_ops(std::uint64_t ops);

std::string run_to_json(const RunRecord& run);
RunRecord run_from_json(const std::string& text);
void save_run(const RunRecord& run, const std::filesystem::path& path);
RunRecord load_run(const std::filesystem::path& path);

} // namespace kstream
