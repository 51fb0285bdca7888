// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Direct loop-nest reference for convolution and max pooling. Slow on
// purpose; every datapath result is diffed against these.

#include "kstream/netmodel.hpp"

#include <span>

namespace kstream::oracle {

/// Pre-quantization accumulators, [m][y][x] order, bias included.
std::vector<Acc48> conv2d_accumulators(const Tensor3D& input, const FilterSet& filters,
                                       const ConvLayerSpec& l);

Tensor3D conv2d_ref(const Tensor3D& input, const FilterSet& filters, const ConvLayerSpec& l);

Tensor3D maxpool_ref(const Tensor3D& input, const PoolSpec& p);

/// Convolution followed by the layer's pooling stage, if any.
Tensor3D layer_ref(const Tensor3D& input, const FilterSet& filters, const ConvLayerSpec& l);

Tensor3D run_network_ref(const NetworkSpec& net, const Tensor3D& input,
                         std::span<const FilterSet> weights);

} // namespace kstream::oracle
