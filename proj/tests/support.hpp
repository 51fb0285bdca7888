// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Independent reference arithmetic for the test suites. Everything here is
// written against plain integers and arbitrary-precision cpp_int, never
// against the library's own fixed-point helpers.

#include "kstream/netmodel.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <random>
#include <vector>

namespace kstest {

using boost::multiprecision::cpp_int;

/// Round-half-even shift by `shift` bits, then saturate to int16.
inline std::int16_t round_saturate(const cpp_int& v, int shift) {
    const cpp_int div = cpp_int(1) << shift;
    cpp_int q = v / div;  // truncates toward zero
    cpp_int r = v - q * div;
    if (r < 0) {
        q -= 1;
        r += div;
    }
    const cpp_int half = div / 2;
    if (r > half || (r == half && (q & 1) != 0)) q += 1;
    if (q > INT16_MAX) return INT16_MAX;
    if (q < INT16_MIN) return INT16_MIN;
    return static_cast<std::int16_t>(q.convert_to<long long>());
}

/// Brute-force convolution: exact sums in cpp_int, bias scaled by 2^8,
/// zero padding, grouping, final round/saturate.
inline kstream::Tensor3D conv_bigint(const kstream::Tensor3D& in, const kstream::FilterSet& w,
                                     const kstream::ConvLayerSpec& l) {
    const int ow = (l.in_w + 2 * l.pad - l.kernel) / l.stride + 1;
    const int oh = (l.in_h + 2 * l.pad - l.kernel) / l.stride + 1;
    const int cpg = l.in_c / l.groups, fpg = l.out_c / l.groups;
    kstream::Tensor3D out(l.out_c, oh, ow);
    for (int m = 0; m < l.out_c; ++m) {
        const int g = m / fpg;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                cpp_int acc = 0;
                if (l.has_bias) acc = cpp_int(w.bias(m).bits) * 256;
                for (int k = 0; k < cpg; ++k) {
                    for (int i = 0; i < l.kernel; ++i) {
                        for (int j = 0; j < l.kernel; ++j) {
                            const int iy = y * l.stride + i - l.pad, ix = x * l.stride + j - l.pad;
                            if (iy < 0 || ix < 0 || iy >= l.in_h || ix >= l.in_w) continue;
                            acc += cpp_int(in.at(g * cpg + k, iy, ix).bits) * cpp_int(w.weight(m, k, i, j).bits);
                        }
                    }
                }
                out.at(m, y, x) = kstream::Fx16::from_bits(round_saturate(acc, 8));
            }
        }
    }
    return out;
}

/// Brute-force max pooling over raw int16 values.
inline kstream::Tensor3D maxpool_brute(const kstream::Tensor3D& in, int kernel, int stride) {
    const int oh = (in.h() - kernel) / stride + 1, ow = (in.w() - kernel) / stride + 1;
    kstream::Tensor3D out(in.c(), oh, ow);
    for (int c = 0; c < in.c(); ++c)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int best = INT16_MIN;
                for (int i = 0; i < kernel; ++i)
                    for (int j = 0; j < kernel; ++j) best = std::max<int>(best, in.at(c, y * stride + i, x * stride + j).bits);
                out.at(c, y, x) = kstream::Fx16::from_bits(static_cast<std::int16_t>(best));
            }
    return out;
}

inline std::int16_t random_bits(std::mt19937_64& rng, int lo = INT16_MIN, int hi = INT16_MAX) {
    return static_cast<std::int16_t>(std::uniform_int_distribution<int>(lo, hi)(rng));
}

} // namespace kstest
