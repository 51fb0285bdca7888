// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/fxp.hpp"

#include "kstream/errors.hpp"

#include <cmath>
#include <string>

namespace kstream {

namespace {

constexpr std::int64_t kAccMax = (std::int64_t{1} << (kAccBits - 1)) - 1;
constexpr std::int64_t kAccMin = -(std::int64_t{1} << (kAccBits - 1));

std::int16_t saturate16(std::int64_t v) noexcept {
    if (v > INT16_MAX) return INT16_MAX;
    if (v < INT16_MIN) return INT16_MIN;
    return static_cast<std::int16_t>(v);
}

} // namespace

Fx16 to_fx(double x) {
    const double scaled = x * (1 << kFracBits);
    if (scaled >= INT16_MAX) return Fx16::max();
    if (scaled <= INT16_MIN) return Fx16::min();
    // Scaling by a power of two is exact, so only this rounding is lossy.
    const double r = scaled - std::floor(scaled);
    auto lo = static_cast<std::int64_t>(std::floor(scaled));
    if (r > 0.5 || (r == 0.5 && (lo & 1) != 0)) ++lo;
    return Fx16::from_bits(saturate16(lo));
}

Acc48 acc_add(Acc48 a, Acc48 b) {
    const std::int64_t s = a.raw + b.raw;
    if (s > kAccMax || s < kAccMin) {
        throw SimulationFault("accumulator overflow: sum leaves the 48-bit range (" +
                              std::to_string(s) + ")");
    }
    return Acc48::from_raw(s);
}

Fx16 quantize(Acc48 a) noexcept {
    constexpr int shift = kAccFracBits - kFracBits;
    constexpr std::int64_t half = std::int64_t{1} << (shift - 1);
    constexpr std::int64_t mask = (std::int64_t{1} << shift) - 1;
    std::int64_t q = a.raw >> shift;  // arithmetic shift: floor
    const std::int64_t rem = a.raw & mask;
    if (rem > half || (rem == half && (q & 1) != 0)) ++q;
    return Fx16::from_bits(saturate16(q));
}

} // namespace kstream
