// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/perf.hpp"

#include "kstream/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kstream {

using nlohmann::json;

PowerProfile measured_profile(double freq_mhz) {
    PowerProfile p;
    p.freq_mhz = freq_mhz;
    if (freq_mhz == 500.0)
        p.power_mw = 425.0;
    else if (freq_mhz == 20.0)
        p.power_mw = 7.0;
    else
        p.power_mw = 0.0;
    return p;
}

std::optional<std::string> envelope_warning(const PowerProfile& p) {
    if (p.freq_mhz >= kMinFreqMhz && p.freq_mhz <= kMaxFreqMhz) return std::nullopt;
    std::ostringstream os;
    os << "warning: " << p.freq_mhz << " MHz is outside the measured " << kMinFreqMhz << ".." << kMaxFreqMhz
       << " MHz range";
    return os.str();
}

double peak_gops(double freq_mhz) {
    return 2.0 * kPeakMacsPerCycle * freq_mhz / 1000.0;
}

Throughput gops(const PerfCounters& c, double freq_mhz) {
    if (c.cycles == 0) throw Error(ErrorKind::InvalidArgument, "gops needs a non-zero cycle count");
    Throughput t;
    t.peak_gops = peak_gops(freq_mhz);
    t.achieved_gops = 2.0 * static_cast<double>(c.macs_executed) * freq_mhz / (static_cast<double>(c.cycles) * 1000.0);
    t.utilization = t.peak_gops > 0 ? t.achieved_gops / t.peak_gops : 0.0;
    return t;
}

double energy_efficiency(double g, const PowerProfile& p) {
    if (p.power_mw <= 0.0) return 0.0;
    return g / p.power_mw;
}

std::optional<double> event_energy_uj(const PerfCounters& c, const PowerProfile& p) {
    if (!p.pj_per_mac || !p.pj_per_sram_word || !p.pj_per_dram_byte) return std::nullopt;
    const double pj = static_cast<double>(c.macs_executed) * *p.pj_per_mac +
                      static_cast<double>(c.sram_reads + c.sram_writes) * *p.pj_per_sram_word +
                      static_cast<double>(c.dram_bytes_in + c.dram_bytes_out) * *p.pj_per_dram_byte;
    return pj / 1e6;
}

bool RunRecord::simulated() const noexcept {
    return !layers.empty() && std::all_of(layers.begin(), layers.end(), [](const LayerRecord& r) {
        return r.counters.has_value();
    });
}

PerfCounters RunRecord::totals() const {
    PerfCounters t;
    for (const auto& r : layers)
        if (r.counters) t += *r.counters;
    return t;
}

// ---------------------------------------------------------------------------
// Report

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string dims(const Dims3& d) {
    return std::to_string(d.w) + "x" + std::to_string(d.h) + "x" + std::to_string(d.c);
}

std::string human_kb(std::uint64_t bytes) {
    return std::to_string(to_kb(bytes)) + "KB";
}

std::string human_mb(std::uint64_t bytes) {
    return fixed(static_cast<double>(bytes) / 1e6, 1) + "MB";
}

using Row = std::vector<std::string>;

const Row kReportHeader{"layer", "input", "output", "ops", "num_ops", "in_kb", "out_kb", "total_kb",
                        "in_mem", "out_mem", "total_mem", "plan", "order", "cycles", "macs",
                        "stall_cycles", "gops", "utilization", "dram_in_B", "dram_out_B"};

struct Table {
    std::vector<Row> rows;
    std::vector<std::pair<std::string, std::string>> summary;
};

Table build_report(const RunRecord& run) {
    Table t;
    t.rows.push_back(kReportHeader);
    std::uint64_t ops = 0, in_b = 0, out_b = 0, in_kb = 0, out_kb = 0, total_kb = 0;
    std::uint64_t dram_in = 0, dram_out = 0;
    const bool sim = run.simulated();
    for (std::size_t i = 0; i < run.layers.size(); ++i) {
        const LayerRecord& r = run.layers[i];
        const Dims3 in{r.layer.in_w, r.layer.in_h, r.layer.in_c};
        const Dims3 out = out_dims(r.layer);
        const std::uint64_t o = ops_count(r.layer), ib = mem_bytes(in), ob = mem_bytes(out);
        ops += o;
        in_b += ib;
        out_b += ob;
        in_kb += to_kb(ib);
        out_kb += to_kb(ob);
        total_kb += to_kb(ib + ob);
        const Traffic tr = r.counters ? Traffic{r.counters->dram_bytes_in, r.counters->dram_bytes_out}
                                      : r.plan.traffic;
        dram_in += tr.bytes_in;
        dram_out += tr.bytes_out;

        Row row{std::to_string(i + 1), dims(in), dims(out), std::to_string(o), humanize_ops(o),
                std::to_string(to_kb(ib)), std::to_string(to_kb(ob)), std::to_string(to_kb(ib + ob)),
                human_kb(ib), human_kb(ob), human_kb(ib + ob),
                std::to_string(r.plan.gx) + "x" + std::to_string(r.plan.gy) + "x" + std::to_string(r.plan.f) +
                    "/s" + std::to_string(r.plan.s),
                to_string(r.plan.order)};
        if (r.counters && r.counters->cycles > 0) {
            const Throughput th = gops(*r.counters, run.profile.freq_mhz);
            row.insert(row.end(), {std::to_string(r.counters->cycles), std::to_string(r.counters->macs_executed),
                                   std::to_string(r.counters->stall_cycles), fixed(th.achieved_gops, 3),
                                   fixed(th.utilization, 4)});
        } else {
            row.insert(row.end(), {"-", "-", "-", "-", "-"});
        }
        row.insert(row.end(), {std::to_string(tr.bytes_in), std::to_string(tr.bytes_out)});
        t.rows.push_back(std::move(row));
    }

    Row total{"total", "", "", std::to_string(ops), humanize_ops(ops), std::to_string(in_kb),
              std::to_string(out_kb), std::to_string(total_kb), human_mb(in_b), human_mb(out_b),
              human_mb(in_b + out_b), "", ""};
    const PerfCounters c = run.totals();
    std::optional<Throughput> th;
    if (sim && c.cycles > 0) {
        th = gops(c, run.profile.freq_mhz);
        total.insert(total.end(), {std::to_string(c.cycles), std::to_string(c.macs_executed),
                                   std::to_string(c.stall_cycles), fixed(th->achieved_gops, 3),
                                   fixed(th->utilization, 4)});
    } else {
        total.insert(total.end(), {"-", "-", "-", "-", "-"});
    }
    total.insert(total.end(), {std::to_string(dram_in), std::to_string(dram_out)});
    t.rows.push_back(std::move(total));

    const double peak = peak_gops(run.profile.freq_mhz);
    t.summary.emplace_back("network", run.network);
    t.summary.emplace_back("freq_mhz", fixed(run.profile.freq_mhz, 1));
    t.summary.emplace_back("power_mw", run.profile.power_mw > 0 ? fixed(run.profile.power_mw, 1) : "unknown");
    t.summary.emplace_back("peak_gops", fixed(peak, 2));
    t.summary.emplace_back("peak_tops_per_w",
                           run.profile.power_mw > 0 ? fixed(energy_efficiency(peak, run.profile), 3) : "-");
    if (th) {
        t.summary.emplace_back("achieved_gops", fixed(th->achieved_gops, 3));
        t.summary.emplace_back("achieved_tops_per_w", run.profile.power_mw > 0
                                                          ? fixed(energy_efficiency(th->achieved_gops, run.profile), 3)
                                                          : "-");
        t.summary.emplace_back("commands", std::to_string(c.commands_executed));
        t.summary.emplace_back("sram_reads", std::to_string(c.sram_reads));
        t.summary.emplace_back("sram_writes", std::to_string(c.sram_writes));
        if (auto e = event_energy_uj(c, run.profile)) t.summary.emplace_back("event_energy_uj", fixed(*e, 3));
    }
    return t;
}

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
    }
    return q + "\"";
}

} // namespace

std::string humanize_ops(std::uint64_t ops) {
    const double v = static_cast<double>(ops);
    if (ops >= 1'000'000'000ULL) return fixed(v / 1e9, 1) + "G";
    if (ops >= 1'000'000ULL) return std::to_string((ops + 500'000) / 1'000'000) + "M";
    if (ops >= 1'000ULL) return std::to_string((ops + 500) / 1'000) + "K";
    return std::to_string(ops);
}

std::string render_report(const RunRecord& run, ReportFormat fmt) {
    const Table t = build_report(run);
    std::ostringstream os;
    if (fmt == ReportFormat::Csv) {
        for (const Row& r : t.rows) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_cell(r[i]);
            os << '\n';
        }
        for (const auto& [k, v] : t.summary) os << "# " << k << "," << csv_cell(v) << '\n';
        return os.str();
    }
    std::vector<std::size_t> width(kReportHeader.size(), 0);
    for (const Row& r : t.rows)
        for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
    for (const Row& r : t.rows) {
        std::string line;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) line += "  ";
            const std::string cell = r[i].empty() ? std::string(1, ' ') : r[i];
            line += cell;
            if (i + 1 < r.size()) line.append(width[i] - std::min(width[i], cell.size()), ' ');
        }
        os << line << '\n';
    }
    os << '\n';
    for (const auto& [k, v] : t.summary) os << k << ": " << v << '\n';
    return os.str();
}

std::string render_plan_csv(const RunRecord& run) {
    std::ostringstream os;
    os << "layer,gx,gy,f,s,in_naive_B,in_halo_B,out_B,wt_B,dram_in_B,dram_out_B,loop_order\n";
    for (std::size_t i = 0; i < run.layers.size(); ++i) {
        const TilePlan& p = run.layers[i].plan;
        os << i + 1 << ',' << p.gx << ',' << p.gy << ',' << p.f << ',' << p.s << ',' << p.footprint.input_naive << ','
           << p.footprint.input_halo << ',' << p.footprint.output << ',' << p.footprint.weights(p.order) << ','
           << p.traffic.bytes_in << ',' << p.traffic.bytes_out << ',' << to_string(p.order) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json dims_json(const Dims3& d) {
    return {d.w, d.h, d.c};
}

Dims3 dims_from(const json& j) {
    return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()};
}

json layer_json(const ConvLayerSpec& l) {
    json j{{"in_w", l.in_w},     {"in_h", l.in_h},     {"in_c", l.in_c}, {"out_c", l.out_c},
           {"kernel", l.kernel}, {"stride", l.stride}, {"pad", l.pad},   {"groups", l.groups},
           {"bias", l.has_bias}};
    if (l.pool) j["pool"] = {l.pool->kernel, l.pool->stride};
    return j;
}

ConvLayerSpec layer_from(const json& j) {
    ConvLayerSpec l;
    l.in_w = j.at("in_w");
    l.in_h = j.at("in_h");
    l.in_c = j.at("in_c");
    l.out_c = j.at("out_c");
    l.kernel = j.at("kernel");
    l.stride = j.at("stride");
    l.pad = j.at("pad");
    l.groups = j.at("groups");
    l.has_bias = j.at("bias");
    if (j.contains("pool")) l.pool = PoolSpec{j["pool"].at(0).get<int>(), j["pool"].at(1).get<int>()};
    validate_layer(l);
    return l;
}

json plan_json(const TilePlan& p) {
    return {{"gx", p.gx},
            {"gy", p.gy},
            {"f", p.f},
            {"s", p.s},
            {"order", to_string(p.order)},
            {"tile_in", dims_json(p.tile_in)},
            {"tile_conv", dims_json(p.tile_conv)},
            {"tile_out", dims_json(p.tile_out)},
            {"footprint",
             {{"input_naive", p.footprint.input_naive},
              {"input_halo", p.footprint.input_halo},
              {"output", p.footprint.output},
              {"weights_group", p.footprint.weights_group},
              {"weights_channel", p.footprint.weights_channel}}},
            {"traffic", {{"bytes_in", p.traffic.bytes_in}, {"bytes_out", p.traffic.bytes_out}}}};
}

TilePlan plan_from(const json& j) {
    TilePlan p;
    p.gx = j.at("gx");
    p.gy = j.at("gy");
    p.f = j.at("f");
    p.s = j.at("s");
    const std::string order = j.at("order");
    if (order == to_string(LoopOrder::TilesOuter))
        p.order = LoopOrder::TilesOuter;
    else if (order == to_string(LoopOrder::FeaturesOuter))
        p.order = LoopOrder::FeaturesOuter;
    else
        throw ParseError(0, "unknown loop order '" + order + "'");
    p.tile_in = dims_from(j.at("tile_in"));
    p.tile_conv = dims_from(j.at("tile_conv"));
    p.tile_out = dims_from(j.at("tile_out"));
    const json& f = j.at("footprint");
    p.footprint = {f.at("input_naive"), f.at("input_halo"), f.at("output"), f.at("weights_group"),
                   f.at("weights_channel")};
    p.traffic = {j.at("traffic").at("bytes_in"), j.at("traffic").at("bytes_out")};
    return p;
}

#define KS_COUNTER_FIELDS(X)                                                                                      \
    X(cycles) X(macs_executed) X(sram_reads) X(sram_writes) X(dram_bytes_in) X(dram_bytes_out) X(stall_cycles) \
        X(commands_executed) X(command_bytes) X(weight_prefetches) X(weight_words_loaded) X(pool_cycles)        \
            X(peak_sram_bytes)

json counters_json(const PerfCounters& c) {
    json j;
#define X(f) j[#f] = c.f;
    KS_COUNTER_FIELDS(X)
#undef X
    return j;
}

PerfCounters counters_from(const json& j) {
    PerfCounters c;
#define X(f) c.f = j.at(#f).get<std::uint64_t>();
    KS_COUNTER_FIELDS(X)
#undef X
    return c;
}

} // namespace

std::string run_to_json(const RunRecord& run) {
    json j;
    j["format"] = "kstream-run/1";
    j["network"] = run.network;
    j["profile"] = {{"freq_mhz", run.profile.freq_mhz}, {"power_mw", run.profile.power_mw}};
    if (run.profile.pj_per_mac) j["profile"]["pj_per_mac"] = *run.profile.pj_per_mac;
    if (run.profile.pj_per_sram_word) j["profile"]["pj_per_sram_word"] = *run.profile.pj_per_sram_word;
    if (run.profile.pj_per_dram_byte) j["profile"]["pj_per_dram_byte"] = *run.profile.pj_per_dram_byte;
    j["layers"] = json::array();
    for (const auto& r : run.layers) {
        json l{{"layer", layer_json(r.layer)}, {"plan", plan_json(r.plan)}};
        if (r.counters) l["counters"] = counters_json(*r.counters);
        j["layers"].push_back(std::move(l));
    }
    return j.dump(2) + "\n";
}

RunRecord run_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.value("format", "") != "kstream-run/1") throw ParseError(0, "not a kstream run record");
        RunRecord run;
        run.network = j.at("network");
        const json& p = j.at("profile");
        run.profile.freq_mhz = p.at("freq_mhz");
        run.profile.power_mw = p.at("power_mw");
        if (p.contains("pj_per_mac")) run.profile.pj_per_mac = p["pj_per_mac"].get<double>();
        if (p.contains("pj_per_sram_word")) run.profile.pj_per_sram_word = p["pj_per_sram_word"].get<double>();
        if (p.contains("pj_per_dram_byte")) run.profile.pj_per_dram_byte = p["pj_per_dram_byte"].get<double>();
        for (const json& l : j.at("layers")) {
            LayerRecord r{layer_from(l.at("layer")), plan_from(l.at("plan")), std::nullopt};
            if (l.contains("counters")) r.counters = counters_from(l["counters"]);
            run.layers.push_back(std::move(r));
        }
        return run;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("run record: ") + e.what());
    }
}

void save_run(const RunRecord& run, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << run_to_json(run);
    if (!out) throw IoError("write failure on " + path.string());
}

RunRecord load_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return run_from_json(ss.str());
}

} // namespace kstream
