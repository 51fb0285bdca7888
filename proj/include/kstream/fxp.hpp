// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <compare>

namespace kstream {

// Datapath word format. Changing these requires re-freezing the
// acceptance vectors.
inline constexpr int kFracBits = 8;
inline constexpr int kAccFracBits = 2 * kFracBits;
inline constexpr int kAccBits = 48;

/// 16-bit two's-complement Q8.8 word.
struct Fx16 {
    std::int16_t bits = 0;

    static constexpr Fx16 from_bits(std::int16_t b) noexcept { return Fx16{b}; }
    static constexpr Fx16 max() noexcept { return Fx16{INT16_MAX}; }
    static constexpr Fx16 min() noexcept { return Fx16{INT16_MIN}; }

    double to_real() const noexcept { return static_cast<double>(bits) / (1 << kFracBits); }

    friend constexpr bool operator==(Fx16, Fx16) = default;
    friend constexpr auto operator<=>(Fx16 a, Fx16 b) { return a.bits <=> b.bits; }
};

/// Wide accumulator, Q?.16 in a 48-bit two's-complement register. Held in
/// an int64; `acc_add` faults if a sum leaves the 48-bit range.
struct Acc48 {
    std::int64_t raw = 0;

    static constexpr Acc48 from_raw(std::int64_t r) noexcept { return Acc48{r}; }
    /// Widens a Q8.8 word (e.g. a bias) to accumulator scale.
    static constexpr Acc48 from_fx(Fx16 v) noexcept {
        return Acc48{static_cast<std::int64_t>(v.bits) * (std::int64_t{1} << kFracBits)};
    }

    double to_real() const noexcept { return static_cast<double>(raw) / (1 << kAccFracBits); }

    friend constexpr bool operator==(Acc48, Acc48) = default;
    friend constexpr auto operator<=>(Acc48 a, Acc48 b) { return a.raw <=> b.raw; }
};

/// Nearest Q8.8 value, ties to even, saturating. `x` must be finite.
Fx16 to_fx(double x);

/// Exact product, 16 fractional bits.
constexpr Acc48 fx_mul(Fx16 a, Fx16 b) noexcept {
    return Acc48{static_cast<std::int64_t>(a.bits) * static_cast<std::int64_t>(b.bits)};
}

/// Exact sum. Throws SimulationFault if the magnitude reaches 2^47, which
/// only happens for layers outside the C*K*K <= 2^16 contract.
Acc48 acc_add(Acc48 a, Acc48 b);

/// Drops 8 fractional bits (round half to even) and saturates to Fx16.
Fx16 quantize(Acc48 a) noexcept;

} // namespace kstream
