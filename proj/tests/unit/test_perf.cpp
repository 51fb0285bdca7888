// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/errors.hpp"
#include "kstream/perf.hpp"
#include "kstream/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <regex>
#include <sstream>

using namespace kstream;

namespace {

NetworkSpec alexnet() {
    return load_network(std::filesystem::path(KSTREAM_DATA_DIR) / "alexnet.net");
}

std::vector<std::string> numbers(const std::string& text) {
    static const std::regex num(R"([0-9]+(\.[0-9]+)?)");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), num); it != std::sregex_iterator(); ++it)
        out.push_back(it->str());
    return out;
}

std::vector<std::string> csv_row(const std::string& csv, std::size_t index) {
    std::istringstream is(csv);
    std::string line;
    for (std::size_t i = 0; i <= index; ++i) std::getline(is, line);
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
}

} // namespace

TEST_CASE("peak throughput") {
    CHECK(peak_gops(500) == 144.0);
    CHECK(peak_gops(20) == 5.76);
}

TEST_CASE("energy efficiency") {
    CHECK(std::abs(energy_efficiency(144.0, measured_profile(500)) - 0.339) <= 0.001);
    CHECK(std::abs(energy_efficiency(5.76, measured_profile(20)) - 0.823) <= 0.001);
    CHECK(energy_efficiency(0.0, measured_profile(500)) == 0.0);
    CHECK(energy_efficiency(10.0, measured_profile(100)) == 0.0);  // unknown power
}

TEST_CASE("achieved throughput") {
    PerfCounters c;
    c.cycles = 1000;
    c.macs_executed = 144'000;
    const Throughput full = gops(c, 500);
    CHECK(full.achieved_gops == full.peak_gops);
    CHECK(full.utilization == 1.0);
    c.macs_executed = 72'000;
    CHECK(gops(c, 500).achieved_gops == 72.0);
    c.cycles = 0;
    CHECK_THROWS(gops(c, 500));
}

TEST_CASE("operating envelope") {
    CHECK(measured_profile(500).power_mw == 425.0);
    CHECK(measured_profile(20).power_mw == 7.0);
    CHECK(measured_profile(250).power_mw <= 0.0);
    CHECK_FALSE(envelope_warning(measured_profile(100)));
    CHECK(envelope_warning(measured_profile(600)));
    CHECK(envelope_warning(measured_profile(10)));
}

TEST_CASE("event energy needs every coefficient") {
    PerfCounters c;
    c.macs_executed = 1'000'000;
    c.sram_reads = 1000;
    c.sram_writes = 1000;
    c.dram_bytes_in = 500;
    c.dram_bytes_out = 500;
    PowerProfile p;
    CHECK_FALSE(event_energy_uj(c, p));
    p.pj_per_mac = 1.0;
    p.pj_per_sram_word = 10.0;
    CHECK_FALSE(event_energy_uj(c, p));
    p.pj_per_dram_byte = 100.0;
    REQUIRE(event_energy_uj(c, p));
    CHECK(*event_energy_uj(c, p) == doctest::Approx(1.0 + 0.02 + 0.1));
}

TEST_CASE("humanized op counts") {
    CHECK(humanize_ops(210'830'400) == "211M");
    CHECK(humanize_ops(447'897'600) == "448M");
    CHECK(humanize_ops(299'040'768) == "299M");
    CHECK(humanize_ops(224'280'576) == "224M");
    CHECK(humanize_ops(149'520'384) == "150M");
    CHECK(humanize_ops(1'331'569'728) == "1.3G");
    CHECK(humanize_ops(2) == "2");
    CHECK(humanize_ops(1500) == "2K");
}

TEST_CASE("plan-only report") {
    const RunRecord run = plan_only(alexnet(), RunOptions{});
    const std::string text = render_report(run, ReportFormat::Text);
    const std::string csv = render_report(run, ReportFormat::Csv);
    for (const char* s : {"211M", "448M", "299M", "224M", "150M", "1.3G", "0.8MB", "1.3MB", "2.1MB", "890KB"})
        CHECK(text.find(s) != std::string::npos);
    CHECK(numbers(text) == numbers(csv));

    const auto header = csv_row(csv, 0);
    const auto l1 = csv_row(csv, 1);
    const auto total = csv_row(csv, 6);
    REQUIRE(header.size() == l1.size());
    auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
    };
    CHECK(l1[col("in_kb")] == "309");
    CHECK(l1[col("out_kb")] == "581");
    CHECK(total[col("layer")] == "total");
    CHECK(total[col("in_kb")] == "796");
    CHECK(total[col("out_kb")] == "1301");
    CHECK(total[col("num_ops")] == "1.3G");
    CHECK(total[col("total_mem")] == "2.1MB");
}

TEST_CASE("empty network report") {
    RunRecord run;
    run.network = "empty";
    const std::string csv = render_report(run, ReportFormat::Csv);
    const auto total = csv_row(csv, 1);
    REQUIRE(total.size() > 4);
    CHECK(total[0] == "total");
    CHECK(total[3] == "0");
    CHECK(numbers(render_report(run, ReportFormat::Text)) == numbers(csv));
}

TEST_CASE("planner CSV") {
    const RunRecord run = plan_only(alexnet(), RunOptions{});
    const std::string csv = render_plan_csv(run);
    CHECK(csv.rfind("layer,gx,gy,f,s,in_naive_B,in_halo_B,out_B,wt_B,dram_in_B,dram_out_B,loop_order\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("run records survive JSON") {
    const NetworkSpec net{"tiny", {[] {
                              ConvLayerSpec l;
                              l.in_w = l.in_h = 12;
                              l.in_c = 2;
                              l.out_c = 4;
                              l.kernel = 3;
                              l.pool = PoolSpec{2, 2};
                              return l;
                          }()}};
    RunOptions opts;
    opts.profile = measured_profile(20);
    opts.profile.pj_per_mac = 0.5;
    const auto w = random_network_filters(net, 1);
    const NetworkResult res = run_network(net, random_tensor(2, 12, 12, 1), w, opts);
    REQUIRE(res.record.simulated());
    const std::string json = run_to_json(res.record);
    const RunRecord back = run_from_json(json);
    CHECK(run_to_json(back) == json);
    CHECK(render_report(back, ReportFormat::Text) == render_report(res.record, ReportFormat::Text));
    CHECK(back.totals() == res.record.totals());
    CHECK(back.profile.pj_per_mac == 0.5);

    CHECK_THROWS_AS(run_from_json("{}"), ParseError);
    CHECK_THROWS_AS(run_from_json("not json"), ParseError);
    CHECK_THROWS_AS(load_run("/nonexistent/run.json"), IoError);
}

TEST_CASE("achieved never exceeds peak") {
    const NetworkSpec net{"two", {[] {
                                      ConvLayerSpec l;
                                      l.in_w = l.in_h = 20;
                                      l.in_c = 3;
                                      l.out_c = 8;
                                      l.kernel = 5;
                                      l.stride = 1;
                                      l.pad = 2;
                                      return l;
                                  }()}};
    const auto res = run_network(net, random_tensor(3, 20, 20, 2), random_network_filters(net, 2), RunOptions{});
    const auto t = gops(res.record.totals(), 500);
    CHECK(t.achieved_gops <= t.peak_gops);
    CHECK(t.achieved_gops > 0);
}
