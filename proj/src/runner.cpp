// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/runner.hpp"

#include "kstream/errors.hpp"
#include "kstream/oracle.hpp"

#include <future>

namespace kstream {

namespace {

void check_inputs(const NetworkSpec& net, const Tensor3D& input, std::span<const FilterSet> weights) {
    if (net.layers.empty()) throw Error(ErrorKind::InvalidArgument, "network has no layers");
    const ConvLayerSpec& l0 = net.layers.front();
    if (input.c() != l0.in_c || input.h() != l0.in_h || input.w() != l0.in_w) {
        throw DimensionError("input tensor is " + std::to_string(input.w()) + "x" + std::to_string(input.h()) + "x" +
                             std::to_string(input.c()) + ", layer 1 expects " + std::to_string(l0.in_w) + "x" +
                             std::to_string(l0.in_h) + "x" + std::to_string(l0.in_c));
    }
    if (weights.size() != net.layers.size()) {
        throw DimensionError("weights hold " + std::to_string(weights.size()) + " layers, network has " +
                             std::to_string(net.layers.size()));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) weights[i].check_matches(net.layers[i]);
}

std::vector<Tensor3D> reference_chain(const NetworkSpec& net, const Tensor3D& input,
                                      std::span<const FilterSet> weights) {
    std::vector<Tensor3D> out;
    out.reserve(net.layers.size());
    const Tensor3D* x = &input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        out.push_back(oracle::layer_ref(*x, weights[i], net.layers[i]));
        x = &out.back();
    }
    return out;
}

} // namespace

std::vector<TilePlan> plan_network(const NetworkSpec& net, const RunOptions& opts) {
    opts.datapath.validate();
    std::vector<TilePlan> plans;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const ConvLayerSpec& l = net.layers[i];
        const std::string where = "layer " + std::to_string(i + 1) + ": ";
        if (opts.tile) {
            const auto [gx, gy, f] = *opts.tile;
            std::optional<TilePlan> p;
            try {
                p = evaluate_plan(l, gx, gy, f, opts.datapath.sram_bytes);
            } catch (const Error& e) {
                throw InfeasibleError(where + e.what());
            }
            if (!p) {
                throw InfeasibleError(where + "tile " + std::to_string(gx) + "," + std::to_string(gy) + "," +
                                      std::to_string(f) + " does not fit in " +
                                      std::to_string(opts.datapath.sram_bytes) + " bytes");
            }
            plans.push_back(*p);
        } else {
            try {
                plans.push_back(plan_layer(l, opts.datapath.sram_bytes));
            } catch (const InfeasibleError& e) {
                throw InfeasibleError(where + e.what());
            }
        }
    }
    return plans;
}

RunRecord plan_only(const NetworkSpec& net, const RunOptions& opts) {
    const auto plans = plan_network(net, opts);
    RunRecord rec;
    rec.network = net.name;
    rec.profile = opts.profile;
    for (std::size_t i = 0; i < net.layers.size(); ++i) rec.layers.push_back({net.layers[i], plans[i], std::nullopt});
    return rec;
}

NetworkResult run_network(const NetworkSpec& net, const Tensor3D& input, std::span<const FilterSet> weights,
                          const RunOptions& opts) {
    check_inputs(net, input, weights);
    const auto plans = plan_network(net, opts);
    NetworkResult res;
    res.record.network = net.name;
    res.record.profile = opts.profile;
    res.layer_outputs.reserve(net.layers.size());
    const Tensor3D* x = &input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        LayerRun run = execute_layer(net.layers[i], plans[i], *x, weights[i], opts.datapath);
        res.record.layers.push_back({net.layers[i], plans[i], run.counters});
        res.layer_outputs.push_back(std::move(run.output));
        x = &res.layer_outputs.back();
    }
    return res;
}

VerifyResult verify_network(const NetworkSpec& net, const Tensor3D& input, std::span<const FilterSet> weights,
                            const RunOptions& opts) {
    check_inputs(net, input, weights);
    auto ref = std::async(std::launch::async, reference_chain, std::cref(net), std::cref(input), weights);
    VerifyResult v;
    try {
        v.run = run_network(net, input, weights, opts);
    } catch (...) {
        ref.wait();
        throw;
    }
    v.reference = ref.get();
    for (std::size_t i = 0; i < v.reference.size(); ++i) {
        const Tensor3D& a = v.run.layer_outputs[i];
        const Tensor3D& b = v.reference[i];
        std::size_t diff = 0;
        if (a.dims() != b.dims()) {
            diff = std::max(a.data().size(), b.data().size());
        } else {
            for (std::size_t k = 0; k < a.data().size(); ++k) diff += a.data()[k] != b.data()[k];
        }
        if (diff && v.first_mismatch_layer < 0) v.first_mismatch_layer = static_cast<int>(i);
        v.mismatched_values += diff;
    }
    return v;
}

} // namespace kstream
