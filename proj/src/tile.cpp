// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/tile.hpp"

#include "kstream/errors.hpp"

#include <algorithm>

namespace kstream {

std::vector<Span> balanced_split(int n, int parts) {
    if (parts < 1 || parts > n) {
        throw Error(ErrorKind::InvalidArgument,
                    "cannot split " + std::to_string(n) + " into " + std::to_string(parts) + " parts");
    }
    std::vector<Span> out;
    out.reserve(static_cast<std::size_t>(parts));
    const int base = n / parts;
    const int extra = n % parts;
    int at = 0;
    for (int i = 0; i < parts; ++i) {
        const int len = base + (i < extra ? 1 : 0);
        out.push_back({at, at + len});
        at += len;
    }
    return out;
}

Span conv_span_for_output(const ConvLayerSpec& l, Span out) {
    if (!l.pool) return out;
    return {out.begin * l.pool->stride, (out.end - 1) * l.pool->stride + l.pool->kernel};
}

Span input_span_for_conv(int in, int kernel, int stride, int pad, Span conv) {
    const int lo = conv.begin * stride - pad;
    const int hi = (conv.end - 1) * stride - pad + kernel;
    const int begin = std::max(0, lo);
    // A window lying entirely in the padding reads no input at all.
    return {begin, std::max(begin, std::min(in, hi))};
}

Span channels_for_features(const ConvLayerSpec& l, Span features) {
    const int cpg = l.channels_per_group();
    return {l.group_of_feature(features.begin) * cpg, (l.group_of_feature(features.end - 1) + 1) * cpg};
}

TileStep make_tile_step(const ConvLayerSpec& l, Region out, Span features, int tile_id, int group_id) {
    TileStep s;
    s.tile_id = tile_id;
    s.group_id = group_id;
    s.out = out;
    s.conv = {conv_span_for_output(l, out.rows), conv_span_for_output(l, out.cols)};
    s.in = {input_span_for_conv(l.in_h, l.kernel, l.stride, l.pad, s.conv.rows),
            input_span_for_conv(l.in_w, l.kernel, l.stride, l.pad, s.conv.cols)};
    s.features = features;
    s.channels = channels_for_features(l, features);
    return s;
}

TileStep whole_layer_step(const ConvLayerSpec& l) {
    const Dims3 f = final_dims(l);
    return make_tile_step(l, {{0, f.h}, {0, f.w}}, {0, l.out_c});
}

} // namespace kstream
