// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/oracle.hpp"

#include "kstream/errors.hpp"

#include <algorithm>
#include <string>

namespace kstream::oracle {

namespace {

void check_input(const Tensor3D& input, const ConvLayerSpec& l) {
    if (input.dims() != Dims3{l.in_w, l.in_h, l.in_c}) {
        throw DimensionError("input " + std::to_string(input.w()) + "x" + std::to_string(input.h()) + "x" +
                             std::to_string(input.c()) + " does not match layer input " +
                             std::to_string(l.in_w) + "x" + std::to_string(l.in_h) + "x" +
                             std::to_string(l.in_c));
    }
}

} // namespace

std::vector<Acc48> conv2d_accumulators(const Tensor3D& input, const FilterSet& filters,
                                       const ConvLayerSpec& l) {
    validate_layer(l);
    check_input(input, l);
    filters.check_matches(l);

    const Dims3 o = out_dims(l);
    const int cpg = l.channels_per_group();
    std::vector<Acc48> acc(o.elements());

    for (int m = 0; m < o.c; ++m) {
        const int k0 = l.group_of_feature(m) * cpg;
        for (int y = 0; y < o.h; ++y) {
            for (int x = 0; x < o.w; ++x) {
                Acc48 sum = l.has_bias ? Acc48::from_fx(filters.bias(m)) : Acc48{};
                for (int k = 0; k < cpg; ++k) {
                    for (int i = 0; i < l.kernel; ++i) {
                        const int iy = l.stride * y + i - l.pad;
                        if (iy < 0 || iy >= l.in_h) continue;
                        for (int j = 0; j < l.kernel; ++j) {
                            const int ix = l.stride * x + j - l.pad;
                            if (ix < 0 || ix >= l.in_w) continue;
                            sum = acc_add(sum, fx_mul(input.at(k0 + k, iy, ix), filters.weight(m, k, i, j)));
                        }
                    }
                }
                acc[(static_cast<std::size_t>(m) * o.h + y) * o.w + x] = sum;
            }
        }
    }
    return acc;
}

Tensor3D conv2d_ref(const Tensor3D& input, const FilterSet& filters, const ConvLayerSpec& l) {
    const auto acc = conv2d_accumulators(input, filters, l);
    const Dims3 o = out_dims(l);
    Tensor3D out(o.c, o.h, o.w);
    std::transform(acc.begin(), acc.end(), out.data().begin(), [](Acc48 a) { return quantize(a); });
    return out;
}

Tensor3D maxpool_ref(const Tensor3D& input, const PoolSpec& p) {
    if (p.kernel != 2 && p.kernel != 3) throw DimensionError("pool kernel must be 2 or 3");
    if (p.stride < 1) throw DimensionError("pool stride must be >= 1");
    if (p.kernel > input.h() || p.kernel > input.w()) throw DimensionError("pool window larger than input");

    const int oh = (input.h() - p.kernel) / p.stride + 1;
    const int ow = (input.w() - p.kernel) / p.stride + 1;
    Tensor3D out(input.c(), oh, ow);
    for (int c = 0; c < input.c(); ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                Fx16 best = Fx16::min();
                for (int i = 0; i < p.kernel; ++i)
                    for (int j = 0; j < p.kernel; ++j)
                        best = std::max(best, input.at(c, y * p.stride + i, x * p.stride + j));
                out.at(c, y, x) = best;
            }
        }
    }
    return out;
}

Tensor3D layer_ref(const Tensor3D& input, const FilterSet& filters, const ConvLayerSpec& l) {
    Tensor3D conv = conv2d_ref(input, filters, l);
    return l.pool ? maxpool_ref(conv, *l.pool) : conv;
}

Tensor3D run_network_ref(const NetworkSpec& net, const Tensor3D& input, std::span<const FilterSet> weights) {
    if (weights.size() != net.layers.size()) {
        throw DimensionError("network has " + std::to_string(net.layers.size()) + " layers but " +
                             std::to_string(weights.size()) + " filter sets were given");
    }
    Tensor3D cur = input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) cur = layer_ref(cur, weights[i], net.layers[i]);
    return cur;
}

} // namespace kstream::oracle
