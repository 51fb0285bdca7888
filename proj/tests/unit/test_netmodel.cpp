// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/errors.hpp"
#include "kstream/netmodel.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace kstream;
namespace fs = std::filesystem;

namespace {

NetworkSpec alexnet() {
    return load_network(fs::path(KSTREAM_DATA_DIR) / "alexnet.net");
}

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("kstream_netmodel_" + name);
}

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

TEST_CASE("bundled AlexNet description") {
    const NetworkSpec net = alexnet();
    REQUIRE(net.layers.size() == 5);
    CHECK(net.name == "alexnet");
    const auto& l1 = net.layers[0];
    CHECK(l1.in_w == 227);
    CHECK(l1.in_h == 227);
    CHECK(l1.in_c == 3);
    CHECK(out_dims(l1) == Dims3{55, 55, 96});
    CHECK(final_dims(l1) == Dims3{27, 27, 96});
    CHECK(final_dims(net.layers[4]) == Dims3{13, 13, 256});
}

TEST_CASE("out_dims") {
    CHECK(out_dims(layer(227, 227, 3, 96, 11, 4)) == Dims3{55, 55, 96});
    CHECK(out_dims(layer(13, 13, 384, 384, 3, 1, 1, 2)) == Dims3{13, 13, 384});
    CHECK(out_dims(layer(9, 9, 2, 5, 9)) == Dims3{1, 1, 5});
    CHECK(out_dims(layer(10, 7, 1, 1, 3, 2, 1)) == Dims3{5, 4, 1});
    CHECK_THROWS_AS(out_dims(layer(4, 4, 1, 1, 7)), DimensionError);
}

TEST_CASE("layer validation") {
    CHECK_THROWS_AS(validate_layer(layer(8, 8, 3, 4, 3, 1, 0, 2)), DimensionError);
    CHECK_THROWS_AS(validate_layer(layer(8, 8, 4, 3, 3, 1, 0, 2)), DimensionError);
    CHECK_THROWS_AS(validate_layer(layer(8, 8, 4, 4, 0)), DimensionError);
    CHECK_THROWS_AS(validate_layer(layer(8, 8, 4, 4, 3, 0)), DimensionError);
    ConvLayerSpec p = layer(8, 8, 1, 1, 3);
    p.pool = PoolSpec{4, 2};
    CHECK_THROWS_AS(validate_layer(p), DimensionError);
    p.pool = PoolSpec{3, 2};
    CHECK_NOTHROW(validate_layer(p));
}

TEST_CASE("ops_count") {
    const NetworkSpec net = alexnet();
    CHECK(ops_count(net.layers[0]) == 210'830'400);
    CHECK(ops_count(net.layers[1]) == 447'897'600);
    CHECK(ops_count(layer(1, 1, 1, 1, 1)) == 2);
    std::uint64_t total = 0;
    for (const auto& l : net.layers) total += ops_count(l);
    CHECK(total == 1'331'569'728);
    CHECK((total + 50'000'000) / 100'000'000 == 13);  // 1.3G
}

TEST_CASE("memory footprints") {
    CHECK(mem_bytes({227, 227, 3}) == 309'174);
    CHECK(to_kb(309'174) == 309);
    CHECK(mem_bytes({55, 55, 96}) == 580'800);
    CHECK(to_kb(580'800) == 581);
    CHECK(mem_bytes({1, 1, 1}) == 2);
    CHECK(to_kb(499) == 0);
    CHECK(to_kb(500) == 1);

    const NetworkSpec net = alexnet();
    std::uint64_t in_kb = 0, out_kb = 0, bytes = 0;
    for (const auto& l : net.layers) {
        const auto ib = mem_bytes({l.in_w, l.in_h, l.in_c}), ob = mem_bytes(out_dims(l));
        in_kb += to_kb(ib);
        out_kb += to_kb(ob);
        bytes += ib + ob;
    }
    CHECK(in_kb == 796);
    CHECK(out_kb == 1301);
    CHECK((bytes + 50'000) / 100'000 == 21);  // 2.1 MB
}

TEST_CASE("parser errors") {
    SUBCASE("empty") {
        CHECK_THROWS_WITH_AS(parse_network(""), "no layers", ParseError);
        CHECK_THROWS_WITH_AS(parse_network("# only a comment\n"), "no layers", ParseError);
    }
    SUBCASE("chaining") {
        const char* text =
            "[layer]\nin_w = 8\nin_h = 8\nin_c = 3\nout_c = 4\nkernel = 3\n"
            "[layer]\nin_w = 6\nin_h = 6\nin_c = 5\nout_c = 4\nkernel = 3\n";
        CHECK_THROWS_AS(parse_network(text), DimensionError);
        try {
            parse_network(text);
        } catch (const DimensionError& e) {
            CHECK(std::string(e.what()).find("layer 2") != std::string::npos);
        }
    }
    SUBCASE("line numbers") {
        try {
            parse_network("[layer]\nin_w = 8\nwidth = 3\n");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 3);
        }
        CHECK_THROWS_AS(parse_network("[layer]\nin_w = -8\n"), ParseError);
        CHECK_THROWS_AS(parse_network("[layer]\nin_w = 8.5\n"), ParseError);
        CHECK_THROWS_AS(parse_network("[layer]\nin_w = 8\nin_w = 9\n"), ParseError);
        CHECK_THROWS_AS(parse_network("in_w = 8\n"), ParseError);
        CHECK_THROWS_AS(parse_network("[conv]\n"), ParseError);
        CHECK_THROWS_AS(parse_network("[layer]\nin_w 8\n"), ParseError);
        CHECK_THROWS_AS(parse_network("[layer]\nin_w = 8\n"), ParseError);  // missing keys
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_network("/nonexistent/net.net"), IoError);
    }
}

TEST_CASE("defaults and round trip") {
    const NetworkSpec one = parse_network("[layer]\nin_w=8\nin_h=6\nin_c=2\nout_c=4\nkernel=3 # comment\npool_kernel=2\n");
    REQUIRE(one.layers.size() == 1);
    const auto& l = one.layers[0];
    CHECK(l.stride == 1);
    CHECK(l.pad == 0);
    CHECK(l.groups == 1);
    CHECK(l.has_bias);
    REQUIRE(l.pool);
    CHECK(l.pool->stride == 2);

    const NetworkSpec net = alexnet();
    CHECK(parse_network(render_network(net)) == net);
    CHECK(parse_network(render_network(one)) == one);
}

TEST_CASE("tensor file round trip") {
    const Tensor3D t = random_tensor(3, 5, 7, 42);
    const auto path = temp_file("t.fxt");
    store_tensor(t, path);
    CHECK(load_tensor(path) == t);
    CHECK(fs::file_size(path) == 16 + 3 * 5 * 7 * 2);

    const Tensor3D img = random_tensor(3, 227, 227, 1);
    store_tensor(img, path);
    CHECK(fs::file_size(path) == 309'190);

    auto bytes = encode_tensor(t);
    CHECK(bytes[0] == 'F');
    CHECK(bytes[3] == '3');
    CHECK(bytes[4] == 3);  // c, little-endian
    bytes.pop_back();
    CHECK_THROWS_AS(decode_tensor(bytes), IoError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_tensor(bytes), IoError);
    fs::remove(path);
}

TEST_CASE("filter file round trip") {
    const NetworkSpec net = alexnet();
    const auto w = random_network_filters(net, 3);
    REQUIRE(w.size() == 5);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK_NOTHROW(w[i].check_matches(net.layers[i]));
    CHECK_THROWS_AS(w[0].check_matches(net.layers[1]), DimensionError);

    const auto path = temp_file("w.fxw");
    store_filters(w, path);
    CHECK(load_filters(path) == w);
    auto bytes = encode_filters(w[2]);
    CHECK(bytes.size() == 16 + (384 * 256 * 9 + 384) * 2);
    bytes.resize(bytes.size() - 2);
    CHECK_THROWS_AS(decode_filters(bytes), IoError);
    fs::remove(path);
}

TEST_CASE("synthetic data is deterministic and in range") {
    CHECK(random_tensor(2, 4, 4, 9) == random_tensor(2, 4, 4, 9));
    CHECK(random_tensor(2, 4, 4, 9) != random_tensor(2, 4, 4, 10));
    const Tensor3D t = random_tensor(4, 16, 16, 1, 1.0);
    for (Fx16 v : t.data()) {
        REQUIRE(v.bits >= -256);
        REQUIRE(v.bits <= 256);
    }
}
