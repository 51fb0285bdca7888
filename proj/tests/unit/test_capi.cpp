// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/kstream.h"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kNet = std::string(KSTREAM_DATA_DIR) + "/alexnet.net";

const char* kTiny =
    "[network]\nname = tiny\n"
    "[layer]\nin_w = 16\nin_h = 16\nin_c = 3\nout_c = 4\nkernel = 3\npad = 1\npool_kernel = 2\n"
    "[layer]\nin_w = 8\nin_h = 8\nin_c = 4\nout_c = 6\nkernel = 3\ngroups = 2\n";

} // namespace

TEST_CASE("status names and errors") {
    CHECK(std::string(ks_status_name(KS_OK)) == "ok");
    CHECK(std::string(ks_status_name(KS_ERR_MISMATCH)) == "mismatch");
    ks_network* net = nullptr;
    CHECK(ks_network_load("/nonexistent.net", &net) == KS_ERR_IO);
    CHECK(net == nullptr);
    CHECK(std::strlen(ks_last_error()) > 0);
    CHECK(ks_network_parse("", &net) == KS_ERR_PARSE);
    CHECK(std::string(ks_last_error()).find("no layers") != std::string::npos);
    CHECK(ks_network_parse(nullptr, &net) == KS_ERR_INVALID_ARGUMENT);
    CHECK(ks_network_parse("[layer]\nin_w=4\nin_h=4\nin_c=1\nout_c=1\nkernel=9\n", &net) == KS_ERR_DIMENSION);
}

TEST_CASE("network inspection") {
    ks_network* net = nullptr;
    REQUIRE(ks_network_load(kNet.c_str(), &net) == KS_OK);
    CHECK(ks_network_layer_count(net) == 5);
    ks_layer_info info;
    REQUIRE(ks_network_layer(net, 0, &info) == KS_OK);
    CHECK(info.in_w == 227);
    CHECK(info.kernel == 11);
    CHECK(info.out_w == 27);
    CHECK(info.ops == 210830400u);
    CHECK(info.input_bytes == 309174u);
    CHECK(info.output_bytes == 580800u);
    CHECK(ks_network_layer(net, 5, &info) == KS_ERR_INVALID_ARGUMENT);

    char* text = nullptr;
    REQUIRE(ks_network_render(net, &text) == KS_OK);
    ks_network* again = nullptr;
    CHECK(ks_network_parse(text, &again) == KS_OK);
    CHECK(ks_network_layer_count(again) == 5);
    ks_string_free(text);
    ks_network_free(again);
    ks_network_free(net);
}

TEST_CASE("plan through the C API") {
    ks_network* net = nullptr;
    REQUIRE(ks_network_load(kNet.c_str(), &net) == KS_OK);
    ks_config cfg;
    ks_config_default(&cfg);
    CHECK(cfg.sram_bytes == 131072u);
    ks_run* run = nullptr;
    REQUIRE(ks_plan(net, &cfg, &run) == KS_OK);
    char* report = nullptr;
    REQUIRE(ks_run_render(run, KS_FORMAT_TEXT, &report) == KS_OK);
    CHECK(std::string(report).find("1.3G") != std::string::npos);
    ks_string_free(report);
    char* csv = nullptr;
    REQUIRE(ks_run_render_plan_csv(run, &csv) == KS_OK);
    CHECK(std::string(csv).rfind("layer,gx,gy,f,s,", 0) == 0);
    ks_string_free(csv);
    ks_throughput tp;
    CHECK(ks_run_throughput(run, &tp) == KS_ERR_INVALID_ARGUMENT);
    ks_tensor* out = nullptr;
    CHECK(ks_run_output(run, &out) == KS_ERR_INVALID_ARGUMENT);
    ks_run_free(run);

    cfg.sram_bytes = 1024;
    CHECK(ks_plan(net, &cfg, &run) == KS_ERR_INFEASIBLE);
    ks_config_default(&cfg);
    cfg.tile_gx = 1;
    cfg.tile_gy = 1;
    cfg.tile_f = 1;
    CHECK(ks_plan(net, &cfg, &run) == KS_ERR_INFEASIBLE);
    cfg.tile_f = 0;
    CHECK(ks_plan(net, &cfg, &run) == KS_ERR_INVALID_ARGUMENT);
    ks_config_default(&cfg);
    cfg.feature_parallel = 3;
    CHECK(ks_plan(net, &cfg, &run) == KS_ERR_INVALID_ARGUMENT);
    ks_config_default(&cfg);
    cfg.freq_mhz = 1000;
    REQUIRE(ks_plan(net, &cfg, &run) == KS_OK);
    CHECK(ks_run_warning(run) != nullptr);
    ks_run_free(run);
    ks_network_free(net);
}

TEST_CASE("run, verify, save and reload") {
    ks_network* net = nullptr;
    REQUIRE(ks_network_parse(kTiny, &net) == KS_OK);
    ks_tensor* in = nullptr;
    REQUIRE(ks_tensor_random(3, 16, 16, 5, &in) == KS_OK);
    ks_weights* w = nullptr;
    REQUIRE(ks_weights_random(net, 6, &w) == KS_OK);

    ks_run* run = nullptr;
    int32_t bad = 99;
    REQUIRE(ks_verify_network(net, in, w, nullptr, &run, &bad) == KS_OK);
    CHECK(bad == -1);
    ks_counters c;
    REQUIRE(ks_run_totals(run, &c) == KS_OK);
    CHECK(c.cycles > 0);
    CHECK(c.macs_executed <= 144 * c.cycles);
    ks_throughput tp;
    REQUIRE(ks_run_throughput(run, &tp) == KS_OK);
    CHECK(tp.peak_gops == 144.0);
    CHECK(tp.achieved_gops <= tp.peak_gops);

    ks_tensor* out = nullptr;
    REQUIRE(ks_run_output(run, &out) == KS_OK);
    int32_t oc, oh, ow;
    ks_tensor_dims(out, &oc, &oh, &ow);
    CHECK(oc == 6);
    CHECK(oh == 6);
    CHECK(ow == 6);

    const fs::path dir = fs::temp_directory_path();
    const std::string json = (dir / "kstream_capi_run.json").string();
    const std::string fxt = (dir / "kstream_capi_out.fxt").string();
    const std::string fxw = (dir / "kstream_capi_w.fxw").string();
    REQUIRE(ks_run_save(run, json.c_str()) == KS_OK);
    REQUIRE(ks_tensor_store(out, fxt.c_str()) == KS_OK);
    REQUIRE(ks_weights_store(w, fxw.c_str()) == KS_OK);

    ks_run* loaded = nullptr;
    REQUIRE(ks_run_load(json.c_str(), &loaded) == KS_OK);
    ks_counters c2;
    ks_run_totals(loaded, &c2);
    CHECK(std::memcmp(&c, &c2, sizeof c) == 0);
    char *a = nullptr, *b = nullptr;
    ks_run_render(run, KS_FORMAT_CSV, &a);
    ks_run_render(loaded, KS_FORMAT_CSV, &b);
    CHECK(std::string(a) == std::string(b));
    ks_string_free(a);
    ks_string_free(b);

    ks_tensor* out2 = nullptr;
    REQUIRE(ks_tensor_load(fxt.c_str(), &out2) == KS_OK);
    CHECK(ks_tensor_equal(out, out2));
    ks_weights* w2 = nullptr;
    REQUIRE(ks_weights_load(fxw.c_str(), net, &w2) == KS_OK);
    ks_run* run2 = nullptr;
    REQUIRE(ks_run_network(net, in, w2, nullptr, &run2) == KS_OK);
    ks_tensor* out3 = nullptr;
    REQUIRE(ks_run_output(run2, &out3) == KS_OK);
    CHECK(ks_tensor_equal(out, out3));

    ks_network* other = nullptr;
    REQUIRE(ks_network_load(kNet.c_str(), &other) == KS_OK);
    ks_weights* mismatched = nullptr;
    CHECK(ks_weights_load(fxw.c_str(), other, &mismatched) == KS_ERR_DIMENSION);
    ks_run* bad_run = nullptr;
    CHECK(ks_run_network(other, in, w, nullptr, &bad_run) == KS_ERR_DIMENSION);

    const int16_t* bits = nullptr;
    std::size_t n = 0;
    REQUIRE(ks_tensor_data(out, &bits, &n) == KS_OK);
    CHECK(n == 6u * 6u * 6u);

    for (auto* t : {in, out, out2, out3}) ks_tensor_free(t);
    ks_weights_free(w);
    ks_weights_free(w2);
    ks_run_free(run);
    ks_run_free(run2);
    ks_run_free(loaded);
    ks_network_free(net);
    ks_network_free(other);
    fs::remove(json);
    fs::remove(fxt);
    fs::remove(fxw);
}

TEST_CASE("metric arithmetic") {
    CHECK(ks_peak_gops(500) == 144.0);
    CHECK(ks_peak_gops(20) == 5.76);
    CHECK(std::abs(ks_energy_efficiency(144.0, 425.0) - 0.339) <= 0.001);
    CHECK(std::abs(ks_energy_efficiency(5.76, 7.0) - 0.823) <= 0.001);
    CHECK(ks_energy_efficiency(0.0, 7.0) == 0.0);
}
