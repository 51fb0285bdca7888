// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/planner.hpp"

#include "kstream/errors.hpp"

#include <algorithm>
#include <tuple>

namespace kstream {

std::string to_string(LoopOrder o) { return o == LoopOrder::TilesOuter ? "tiles-outer" : "features-outer"; }

int halo_extent(int out_dim, int kernel, int stride, int in_dim) {
    return std::min((out_dim - 1) * stride + kernel, in_dim);
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void check_split(const ConvLayerSpec& l, int gx, int gy, int f) {
    const Dims3 fd = final_dims(l);
    if (gx < 1 || gy < 1 || f < 1 || gx > fd.w || gy > fd.h || f > l.out_c) {
        throw Error(ErrorKind::InvalidArgument, "split (" + std::to_string(gx) + "," + std::to_string(gy) + "," +
                                                    std::to_string(f) + ") does not fit output " +
                                                    std::to_string(fd.w) + "x" + std::to_string(fd.h) + "x" +
                                                    std::to_string(fd.c));
    }
}

int conv_tile(const ConvLayerSpec& l, int final_tile) {
    return l.pool ? (final_tile - 1) * l.pool->stride + l.pool->kernel : final_tile;
}

std::uint64_t group_weight_bytes(const ConvLayerSpec& l, int feats) {
    const auto k2 = static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel);
    return (static_cast<std::uint64_t>(feats) * static_cast<std::uint64_t>(l.channels_per_group()) * k2 +
            static_cast<std::uint64_t>(feats)) *
           2;
}

int max_group_channels(const ConvLayerSpec& l, int f) {
    int chans = 0;
    for (const Span& g : balanced_split(l.out_c, f)) chans = std::max(chans, channels_for_features(l, g).size());
    return chans;
}

} // namespace

Footprint tile_footprint(const ConvLayerSpec& l, int gx, int gy, int f) {
    validate_layer(l);
    check_split(l, gx, gy, f);
    const Dims3 fd = final_dims(l);

    const int conv_w = conv_tile(l, ceil_div(fd.w, gx));
    const int conv_h = conv_tile(l, ceil_div(fd.h, gy));
    const int halo_w = halo_extent(conv_w, l.kernel, l.stride, l.in_w);
    const int halo_h = halo_extent(conv_h, l.kernel, l.stride, l.in_h);

    const int feats = ceil_div(l.out_c, f);
    const int chans = max_group_channels(l, f);
    const auto k2 = static_cast<std::uint64_t>(l.kernel) * static_cast<std::uint64_t>(l.kernel);

    Footprint fp;
    fp.input_naive = static_cast<std::uint64_t>(ceil_div(l.in_w, gx)) * ceil_div(l.in_h, gy) * chans * 2;
    fp.input_halo = static_cast<std::uint64_t>(halo_w) * halo_h * chans * 2;
    fp.output = static_cast<std::uint64_t>(conv_w) * conv_h * feats * 2;
    fp.weights_group = group_weight_bytes(l, feats);
    fp.weights_channel = (static_cast<std::uint64_t>(feats) * k2 + static_cast<std::uint64_t>(feats)) * 2;
    return fp;
}

std::vector<TileStep> enumerate_steps(const ConvLayerSpec& l, int gx, int gy, int f) {
    check_split(l, gx, gy, f);
    const Dims3 fd = final_dims(l);
    const auto rows = balanced_split(fd.h, gy);
    const auto cols = balanced_split(fd.w, gx);
    const auto groups = balanced_split(l.out_c, f);
    std::vector<TileStep> steps;
    steps.reserve(rows.size() * cols.size() * groups.size());
    for (std::size_t ty = 0; ty < rows.size(); ++ty)
        for (std::size_t tx = 0; tx < cols.size(); ++tx)
            for (std::size_t g = 0; g < groups.size(); ++g)
                steps.push_back(make_tile_step(l, {rows[ty], cols[tx]}, groups[g],
                                               static_cast<int>(ty * cols.size() + tx), static_cast<int>(g)));
    return steps;
}

Traffic dram_traffic(const ConvLayerSpec& l, int gx, int gy, int f, LoopOrder order) {
    check_split(l, gx, gy, f);
    const Dims3 fd = final_dims(l);

    // Tile input areas are separable: sum(rows) * sum(cols).
    std::uint64_t in_rows = 0, in_cols = 0;
    for (const Span& r : balanced_split(fd.h, gy))
        in_rows += static_cast<std::uint64_t>(
            input_span_for_conv(l.in_h, l.kernel, l.stride, l.pad, conv_span_for_output(l, r)).size());
    for (const Span& c : balanced_split(fd.w, gx))
        in_cols += static_cast<std::uint64_t>(
            input_span_for_conv(l.in_w, l.kernel, l.stride, l.pad, conv_span_for_output(l, c)).size());
    const std::uint64_t tiles = static_cast<std::uint64_t>(gx) * static_cast<std::uint64_t>(gy);

    Traffic t;
    for (const Span& g : balanced_split(l.out_c, f)) {
        const auto chans = static_cast<std::uint64_t>(channels_for_features(l, g).size());
        const std::uint64_t w = group_weight_bytes(l, g.size());
        t.bytes_in += chans * in_rows * in_cols * 2;
        t.bytes_in += order == LoopOrder::TilesOuter ? w * tiles : w;
    }
    t.bytes_out = mem_bytes(fd);
    return t;
}

std::optional<TilePlan> evaluate_plan(const ConvLayerSpec& l, int gx, int gy, int f, std::size_t sram_bytes) {
    const Footprint fp = tile_footprint(l, gx, gy, f);
    std::optional<TilePlan> best;
    for (LoopOrder order : {LoopOrder::FeaturesOuter, LoopOrder::TilesOuter}) {
        if (fp.total(order) > sram_bytes) continue;
        const Traffic t = dram_traffic(l, gx, gy, f, order);
        if (best && t.bytes_in + t.bytes_out >= best->traffic.bytes_in + best->traffic.bytes_out) continue;
        TilePlan p;
        p.gx = gx;
        p.gy = gy;
        p.f = f;
        p.s = subkernel_count(l.kernel);
        p.order = order;
        p.footprint = fp;
        p.traffic = t;
        best = p;
    }
    if (best) {
        const Dims3 fd = final_dims(l);
        const int tw = ceil_div(fd.w, gx), th = ceil_div(fd.h, gy);
        const int feats = ceil_div(l.out_c, f);
        best->tile_out = {tw, th, feats};
        best->tile_conv = {conv_tile(l, tw), conv_tile(l, th), feats};
        best->tile_in = {halo_extent(best->tile_conv.w, l.kernel, l.stride, l.in_w),
                         halo_extent(best->tile_conv.h, l.kernel, l.stride, l.in_h), max_group_channels(l, f)};
    }
    return best;
}

namespace {

constexpr int kMaxSpatialSplit = 16;
constexpr int kMaxFeatureGroups = 256;  // 8-bit group field

} // namespace

TilePlan plan_layer(const ConvLayerSpec& l, std::size_t sram_bytes) {
    validate_layer(l);
    const Dims3 fd = final_dims(l);
    std::optional<TilePlan> best;
    auto key = [](const TilePlan& p) {
        return std::make_tuple(p.gx * p.gy * p.f, p.traffic.bytes_in + p.traffic.bytes_out, p.f, p.gx, p.gy);
    };

    for (int f = 1; f <= std::min(l.out_c, kMaxFeatureGroups); ++f) {
        if (l.out_c % f != 0) continue;
        for (int gx = 1; gx <= std::min(fd.w, kMaxSpatialSplit); ++gx) {
            for (int gy = 1; gy <= std::min(fd.h, kMaxSpatialSplit); ++gy) {
                if (best && gx * gy * f > best->gx * best->gy * best->f) continue;
                auto p = evaluate_plan(l, gx, gy, f, sram_bytes);
                if (p && (!best || key(*p) < key(*best))) best = p;
            }
        }
    }
    if (!best) {
        throw InfeasibleError("no decomposition fits " + std::to_string(sram_bytes) + " bytes of SRAM");
    }
    return *best;
}

} // namespace kstream
