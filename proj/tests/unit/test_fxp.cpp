// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/errors.hpp"
#include "kstream/fxp.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>

using namespace kstream;
using kstest::cpp_int;

TEST_CASE("to_fx basic values") {
    CHECK(to_fx(1.0).bits == 0x0100);
    CHECK(to_fx(-1.0).bits == static_cast<std::int16_t>(0xFF00));
    CHECK(to_fx(200.0) == Fx16::max());
    CHECK(to_fx(-200.0) == Fx16::min());
    CHECK(to_fx(0.5).bits == 0x0080);
    CHECK(to_fx(127.99609375) == Fx16::max());
    CHECK(to_fx(-128.0) == Fx16::min());
}

TEST_CASE("to_fx rounds ties to even") {
    CHECK(to_fx(0.5 / 256).bits == 0);
    CHECK(to_fx(1.5 / 256).bits == 2);
    CHECK(to_fx(2.5 / 256).bits == 2);
    CHECK(to_fx(-0.5 / 256).bits == 0);
    CHECK(to_fx(-1.5 / 256).bits == -2);
    CHECK(to_fx(0.6 / 256).bits == 1);
}

TEST_CASE("to_fx round-trips every 16-bit pattern") {
    for (int b = INT16_MIN; b <= INT16_MAX; ++b) {
        const Fx16 x = Fx16::from_bits(static_cast<std::int16_t>(b));
        REQUIRE(to_fx(x.to_real()) == x);
    }
}

TEST_CASE("fx_mul is exact") {
    CHECK(fx_mul(to_fx(1.0), to_fx(1.0)).to_real() == 1.0);
    CHECK(fx_mul(to_fx(0.5), to_fx(0.5)).to_real() == 0.25);
    CHECK(fx_mul(Fx16::max(), Fx16::max()).raw == std::int64_t{32767} * 32767);
    CHECK(fx_mul(Fx16::min(), Fx16::min()).raw == std::int64_t{32768} * 32768);

    std::mt19937_64 rng(11);
    for (int i = 0; i < 1000; ++i) {
        const auto a = kstest::random_bits(rng), b = kstest::random_bits(rng);
        const cpp_int expect = cpp_int(a) * cpp_int(b);
        REQUIRE(cpp_int(fx_mul(Fx16::from_bits(a), Fx16::from_bits(b)).raw) == expect);
    }
}

TEST_CASE("acc_add identities and fault") {
    const Acc48 x = Acc48::from_raw(123456789);
    CHECK(acc_add(Acc48{}, x) == x);
    CHECK(acc_add(Acc48::from_fx(to_fx(1.0)), Acc48::from_fx(to_fx(-1.0))) == Acc48{});

    const std::int64_t top = (std::int64_t{1} << 47) - 1;
    CHECK(acc_add(Acc48::from_raw(top - 1), Acc48::from_raw(1)).raw == top);
    CHECK_THROWS_AS(acc_add(Acc48::from_raw(top), Acc48::from_raw(1)), SimulationFault);
    CHECK(acc_add(Acc48::from_raw(-top), Acc48::from_raw(-1)).raw == -top - 1);
    CHECK_THROWS_AS(acc_add(Acc48::from_raw(-top - 1), Acc48::from_raw(-1)), SimulationFault);
}

TEST_CASE("sum of 363 products matches arbitrary precision") {
    std::mt19937_64 rng(363);
    for (int trial = 0; trial < 50; ++trial) {
        Acc48 acc{};
        cpp_int expect = 0;
        for (int i = 0; i < 3 * 11 * 11; ++i) {
            const auto a = kstest::random_bits(rng), b = kstest::random_bits(rng);
            acc = acc_add(acc, fx_mul(Fx16::from_bits(a), Fx16::from_bits(b)));
            expect += cpp_int(a) * cpp_int(b);
        }
        REQUIRE(cpp_int(acc.raw) == expect);
    }
}

TEST_CASE("2^16 extreme products fit the accumulator") {
    Acc48 acc{};
    for (int i = 0; i < (1 << 16); ++i) acc = acc_add(acc, fx_mul(Fx16::min(), Fx16::min()));
    CHECK(acc.raw == (std::int64_t{1} << 46));
}

TEST_CASE("accumulation order does not matter") {
    std::mt19937_64 rng(5);
    std::vector<Acc48> terms;
    for (int i = 0; i < 4096; ++i) terms.push_back(fx_mul(Fx16::from_bits(kstest::random_bits(rng)), Fx16::from_bits(kstest::random_bits(rng))));
    auto sum = [&] {
        Acc48 s{};
        for (auto t : terms) s = acc_add(s, t);
        return s;
    };
    const Acc48 base = sum();
    for (int i = 0; i < 10; ++i) {
        std::shuffle(terms.begin(), terms.end(), rng);
        REQUIRE(sum() == base);
    }
}

TEST_CASE("quantize basic values") {
    CHECK(quantize(Acc48::from_fx(to_fx(1.0))).bits == 0x0100);
    CHECK(quantize(Acc48::from_raw(std::int64_t{300} << 16)) == Fx16::max());
    CHECK(quantize(Acc48::from_raw(-(std::int64_t{300} << 16))) == Fx16::min());
    CHECK(quantize(Acc48::from_raw(128)).bits == 0);  // 0.5 ulp
    CHECK(quantize(Acc48::from_raw(384)).bits == 2);  // 1.5 ulp
    CHECK(quantize(Acc48::from_raw(-128)).bits == 0);
    CHECK(quantize(Acc48::from_raw(-384)).bits == -2);
    CHECK(quantize(Acc48::from_raw(129)).bits == 1);
}

TEST_CASE("quantize of products matches arbitrary precision over a stratified sample") {
    // Strata by magnitude so small, mid and saturating products are all
    // covered, plus the sign combinations.
    const std::array<std::pair<int, int>, 6> strata{{{-16, 16},
                                                     {-256, 256},
                                                     {-4096, 4096},
                                                     {INT16_MIN, INT16_MAX},
                                                     {INT16_MAX - 64, INT16_MAX},
                                                     {INT16_MIN, INT16_MIN + 64}}};
    std::mt19937_64 rng(20261018);
    std::size_t n = 0;
    for (const auto& sa : strata) {
        for (const auto& sb : strata) {
            for (int i = 0; i < 28000; ++i, ++n) {
                const auto a = kstest::random_bits(rng, sa.first, sa.second);
                const auto b = kstest::random_bits(rng, sb.first, sb.second);
                const Fx16 got = quantize(fx_mul(Fx16::from_bits(a), Fx16::from_bits(b)));
                const std::int16_t want = kstest::round_saturate(cpp_int(a) * cpp_int(b), 8);
                if (got.bits != want) {
                    FAIL("a=" << a << " b=" << b << " got " << got.bits << " want " << want);
                }
            }
        }
    }
    CHECK(n >= 1'000'000);
}

TEST_CASE("quantize is monotone") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::int64_t> d(-(std::int64_t{1} << 40), std::int64_t{1} << 40);
    for (int i = 0; i < 200000; ++i) {
        auto a = d(rng), b = d(rng);
        if (a > b) std::swap(a, b);
        REQUIRE(quantize(Acc48::from_raw(a)) <= quantize(Acc48::from_raw(b)));
    }
    for (std::int64_t r = -70000; r < 70000; ++r) REQUIRE(quantize(Acc48::from_raw(r)) <= quantize(Acc48::from_raw(r + 1)));
}
