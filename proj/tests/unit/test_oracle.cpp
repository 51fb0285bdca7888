// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/errors.hpp"
#include "kstream/oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace kstream;

namespace {

ConvLayerSpec layer(int w, int h, int c, int m, int k, int s = 1, int pad = 0, int g = 1) {
    ConvLayerSpec l;
    l.in_w = w;
    l.in_h = h;
    l.in_c = c;
    l.out_c = m;
    l.kernel = k;
    l.stride = s;
    l.pad = pad;
    l.groups = g;
    return l;
}

} // namespace

TEST_CASE("identity kernel reproduces the input") {
    const ConvLayerSpec l = layer(9, 7, 1, 1, 3, 1, 1);
    FilterSet f(1, 1, 3);
    f.weight(0, 0, 1, 1) = to_fx(1.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Tensor3D in = random_tensor(1, 7, 9, seed, 100.0);
        CHECK(oracle::conv2d_ref(in, f, l) == in);
    }
}

TEST_CASE("zero weights give the bias everywhere") {
    const ConvLayerSpec l = layer(6, 6, 3, 4, 3);
    FilterSet f(4, 3, 3);
    for (int m = 0; m < 4; ++m) f.bias(m) = to_fx(0.25 * (m - 1));
    const Tensor3D out = oracle::conv2d_ref(random_tensor(3, 6, 6, 1), f, l);
    for (int m = 0; m < 4; ++m)
        for (int y = 0; y < out.h(); ++y)
            for (int x = 0; x < out.w(); ++x) REQUIRE(out.at(m, y, x) == f.bias(m));

    ConvLayerSpec nb = l;
    nb.has_bias = false;
    const Tensor3D zero = oracle::conv2d_ref(random_tensor(3, 6, 6, 1), f, nb);
    CHECK(std::all_of(zero.data().begin(), zero.data().end(), [](Fx16 v) { return v.bits == 0; }));
}

TEST_CASE("convolution matches arbitrary-precision brute force") {
    struct Case {
        ConvLayerSpec l;
        double range;
    };
    const Case cases[] = {
        {layer(8, 8, 3, 4, 3), 2.0},
        {layer(8, 8, 3, 4, 3, 1, 1), 2.0},
        {layer(11, 9, 4, 6, 5, 2, 2, 2), 4.0},
        {layer(16, 16, 2, 2, 7, 4, 1), 8.0},
        {layer(12, 12, 2, 2, 3), 127.0},  // saturates
    };
    std::uint64_t seed = 100;
    for (const auto& c : cases) {
        const Tensor3D in = random_tensor(c.l.in_c, c.l.in_h, c.l.in_w, seed++, c.range);
        const FilterSet f = random_filters(c.l, seed++, c.range > 100 ? 100.0 : 0.5);
        CHECK(oracle::conv2d_ref(in, f, c.l) == kstest::conv_bigint(in, f, c.l));
    }
}

TEST_CASE("dimension mismatches are rejected") {
    const ConvLayerSpec l = layer(8, 8, 3, 4, 3);
    CHECK_THROWS_AS(oracle::conv2d_ref(random_tensor(2, 8, 8, 1), random_filters(l, 1), l), DimensionError);
    CHECK_THROWS_AS(oracle::conv2d_ref(random_tensor(3, 8, 8, 1), random_filters(layer(8, 8, 3, 4, 5), 1), l),
                    DimensionError);
}

TEST_CASE("maxpool examples") {
    Tensor3D t(1, 2, 2);
    t.at(0, 0, 0) = to_fx(1);
    t.at(0, 0, 1) = to_fx(2);
    t.at(0, 1, 0) = to_fx(3);
    t.at(0, 1, 1) = to_fx(4);
    const Tensor3D p = oracle::maxpool_ref(t, PoolSpec{2, 2});
    REQUIRE(p.dims() == Dims3{1, 1, 1});
    CHECK(p.at(0, 0, 0) == to_fx(4.0));

    Tensor3D flat(2, 6, 6);
    for (auto& v : flat.data()) v = to_fx(-3.5);
    const Tensor3D fp = oracle::maxpool_ref(flat, PoolSpec{3, 1});
    CHECK(fp.dims() == Dims3{4, 4, 2});
    CHECK(std::all_of(fp.data().begin(), fp.data().end(), [](Fx16 v) { return v == to_fx(-3.5); }));

    CHECK_THROWS_AS(oracle::maxpool_ref(Tensor3D(1, 2, 5), PoolSpec{3, 1}), DimensionError);
}

TEST_CASE("maxpool of a 55x55x96 tensor") {
    const Tensor3D t = random_tensor(96, 55, 55, 77, 100.0);
    const Tensor3D p = oracle::maxpool_ref(t, PoolSpec{3, 2});
    CHECK(p.dims() == Dims3{27, 27, 96});
    CHECK(p == kstest::maxpool_brute(t, 3, 2));
}

TEST_CASE("maxpool never exceeds the input maximum and is idempotent on blocks") {
    const Tensor3D t = random_tensor(3, 12, 12, 5);
    const Tensor3D p = oracle::maxpool_ref(t, PoolSpec{3, 2});
    const auto in_max = *std::max_element(t.data().begin(), t.data().end());
    CHECK(*std::max_element(p.data().begin(), p.data().end()) <= in_max);

    Tensor3D blocks(1, 6, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) blocks.at(0, y, x) = Fx16::from_bits(static_cast<std::int16_t>((y / 2) * 3 + x / 2));
    const Tensor3D once = oracle::maxpool_ref(blocks, PoolSpec{2, 2});
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) CHECK(once.at(0, y, x) == blocks.at(0, 2 * y, 2 * x));
}

TEST_CASE("linearity before quantization") {
    ConvLayerSpec l = layer(10, 10, 2, 3, 3, 1, 1);
    l.has_bias = false;
    const Tensor3D in = random_tensor(2, 10, 10, 4, 4.0);
    const FilterSet f = random_filters(l, 4);
    const auto base = oracle::conv2d_accumulators(in, f, l);
    for (int shift : {1, 2, 3}) {
        Tensor3D scaled = in;
        for (auto& v : scaled.data()) v.bits = static_cast<std::int16_t>(v.bits * (1 << shift));
        const auto acc = oracle::conv2d_accumulators(scaled, f, l);
        REQUIRE(acc.size() == base.size());
        for (std::size_t i = 0; i < acc.size(); ++i) REQUIRE(acc[i].raw == base[i].raw * (1 << shift));
    }
}

TEST_CASE("translation covariance") {
    const ConvLayerSpec l = layer(20, 9, 2, 2, 3, 2);
    const ConvLayerSpec shifted = layer(18, 9, 2, 2, 3, 2);
    const Tensor3D in = random_tensor(2, 9, 20, 8);
    Tensor3D cut(2, 9, 18);
    for (int c = 0; c < 2; ++c)
        for (int y = 0; y < 9; ++y)
            for (int x = 0; x < 18; ++x) cut.at(c, y, x) = in.at(c, y, x + 2);
    const FilterSet f = random_filters(l, 8);
    const Tensor3D a = oracle::conv2d_ref(in, f, l);
    const Tensor3D b = oracle::conv2d_ref(cut, f, shifted);
    for (int m = 0; m < 2; ++m)
        for (int y = 0; y < b.h(); ++y)
            for (int x = 0; x < b.w(); ++x) REQUIRE(b.at(m, y, x) == a.at(m, y, x + 1));
}

TEST_CASE("network composition") {
    ConvLayerSpec l1 = layer(12, 12, 2, 4, 3, 1, 1);
    l1.pool = PoolSpec{2, 2};
    const ConvLayerSpec l2 = layer(6, 6, 4, 3, 3, 1, 0, 1);
    const NetworkSpec single{"one", {l1}};
    const NetworkSpec two{"two", {l1, l2}};
    const Tensor3D in = random_tensor(2, 12, 12, 21);
    const std::vector<FilterSet> w{random_filters(l1, 1), random_filters(l2, 2)};

    const Tensor3D c1 = oracle::conv2d_ref(in, w[0], l1);
    const Tensor3D p1 = oracle::maxpool_ref(c1, *l1.pool);
    CHECK(oracle::run_network_ref(single, in, std::span(w).first(1)) == p1);
    CHECK(oracle::run_network_ref(two, in, w) == oracle::conv2d_ref(p1, w[1], l2));
}

TEST_CASE("AlexNet reference output dims") {
    const NetworkSpec net = load_network(std::filesystem::path(KSTREAM_DATA_DIR) / "alexnet.net");
    const auto w = random_network_filters(net, 7);
    const Tensor3D out = oracle::run_network_ref(net, random_tensor(3, 227, 227, 7), w);
    CHECK(out.dims() == Dims3{13, 13, 256});
}
