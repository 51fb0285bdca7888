// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kstream/datapath.hpp"
#include "kstream/perf.hpp"
#include "kstream/planner.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace kstream {

struct RunOptions {
    DatapathConfig datapath;
    std::optional<std::array<int, 3>> tile;  // forced gx, gy, f for every layer
    PowerProfile profile;
};

/// Plans every layer; throws InfeasibleError naming the layer on failure.
std::vector<TilePlan> plan_network(const NetworkSpec& net, const RunOptions& opts);
RunRecord plan_only(const NetworkSpec& net, const RunOptions& opts);

struct NetworkResult {
    RunRecord record;
    std::vector<Tensor3D> layer_outputs;  // final output of every layer
    const Tensor3D& output() const { return layer_outputs.back(); }
};

NetworkResult run_network(const NetworkSpec& net, const Tensor3D& input,
                          std::span<const FilterSet> weights, const RunOptions& opts);

struct VerifyResult {
    NetworkResult run;
    std::vector<Tensor3D> reference;  // oracle output of every layer
    int first_mismatch_layer = -1;    // -1 when bit-identical everywhere
    std::size_t mismatched_values = 0;

    bool match() const noexcept { return first_mismatch_layer < 0; }
};

/// Runs the datapath and the oracle side by side (the oracle on a second
/// thread) and diffs every layer's output bit for bit.
VerifyResult verify_network(const NetworkSpec& net, const Tensor3D& input,
                            std::span<const FilterSet> weights, const RunOptions& opts);

} // namespace kstream
