// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "kstream/netmodel.hpp"

#include <vector>

namespace kstream {

/// Half-open index range.
struct Span {
    int begin = 0;
    int end = 0;

    int size() const noexcept { return end - begin; }
    bool contains(int i) const noexcept { return i >= begin && i < end; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Region {
    Span rows;
    Span cols;

    std::size_t area() const noexcept {
        return static_cast<std::size_t>(rows.size()) * static_cast<std::size_t>(cols.size());
    }
    friend bool operator==(const Region&, const Region&) = default;
};

/// Splits [0, n) into `parts` contiguous pieces; the first n % parts
/// pieces are one element longer (227 over 3 -> 76, 76, 75).
std::vector<Span> balanced_split(int n, int parts);

/// One unit of work for the datapath: an output region of a feature range.
/// `out` is in final (pooled, when pooling) coordinates; `conv` is the
/// convolution output it needs and `in` the clipped input halo.
struct TileStep {
    int tile_id = 0;
    int group_id = 0;
    Region out;
    Region conv;
    Region in;
    Span features;
    Span channels;

    friend bool operator==(const TileStep&, const TileStep&) = default;
};

/// Convolution rows/cols needed to produce final outputs `out` on one axis.
Span conv_span_for_output(const ConvLayerSpec& l, Span out);
/// Input rows/cols read by convolution outputs `conv`, clipped to [0, in).
Span input_span_for_conv(int in, int kernel, int stride, int pad, Span conv);
/// Input channels read by output features `features`.
Span channels_for_features(const ConvLayerSpec& l, Span features);

TileStep make_tile_step(const ConvLayerSpec& l, Region out, Span features, int tile_id = 0,
                        int group_id = 0);
/// Entire layer as one tile, all features.
TileStep whole_layer_step(const ConvLayerSpec& l);

} // namespace kstream
