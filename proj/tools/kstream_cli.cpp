// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
//
// kstream-cli: plan, run, verify and report on the streaming accelerator
// model. Talks to the simulator only through the C interface.

#include "kstream/kstream.h"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kMismatch = 3, kIo = 4 };

int exit_for(ks_status s) {
    switch (s) {
    case KS_OK: return kOk;
    case KS_ERR_INVALID_ARGUMENT: return kUsage;
    case KS_ERR_INFEASIBLE:
    case KS_ERR_CAPACITY: return kInfeasible;
    case KS_ERR_MISMATCH:
    case KS_ERR_SIMULATION:
    case KS_ERR_INTERNAL: return kMismatch;
    case KS_ERR_PARSE:
    case KS_ERR_DIMENSION:
    case KS_ERR_IO: return kIo;
    }
    return kUsage;
}

struct Failure {
    int code;
};

void check(ks_status s, const char* what) {
    if (s == KS_OK) return;
    std::cerr << "kstream-cli: " << what << ": " << ks_status_name(s) << ": " << ks_last_error() << "\n";
    throw Failure{exit_for(s)};
}

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Network = std::unique_ptr<ks_network, Deleter<ks_network, ks_network_free>>;
using Tensor = std::unique_ptr<ks_tensor, Deleter<ks_tensor, ks_tensor_free>>;
using Weights = std::unique_ptr<ks_weights, Deleter<ks_weights, ks_weights_free>>;
using Run = std::unique_ptr<ks_run, Deleter<ks_run, ks_run_free>>;
using Text = std::unique_ptr<char, Deleter<char, ks_string_free>>;

struct Options {
    std::string net;
    std::string input;
    std::string weights;
    std::string out;
    std::string tile;
    std::string format = "text";
    std::string run_path;
    unsigned sram_kb = 128;
    double freq_mhz = 500.0;
    double power_mw = 0.0;
    std::uint64_t seed = 1;
    bool random_weights = false;
};

ks_config make_config(const Options& o) {
    ks_config cfg;
    ks_config_default(&cfg);
    cfg.sram_bytes = static_cast<std::uint64_t>(o.sram_kb) * 1024u;
    cfg.freq_mhz = o.freq_mhz;
    cfg.power_mw = o.power_mw;
    if (!o.tile.empty()) {
        std::istringstream is(o.tile);
        int v[3];
        char c1 = 0, c2 = 0;
        if (!(is >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',' || !is.eof() || v[0] <= 0 ||
            v[1] <= 0 || v[2] <= 0) {
            std::cerr << "kstream-cli: --tile expects GX,GY,F with positive integers\n";
            throw Failure{kUsage};
        }
        cfg.tile_gx = v[0];
        cfg.tile_gy = v[1];
        cfg.tile_f = v[2];
    }
    return cfg;
}

ks_format format_of(const Options& o) {
    return o.format == "csv" ? KS_FORMAT_CSV : KS_FORMAT_TEXT;
}

Network load_net(const Options& o) {
    ks_network* n = nullptr;
    check(ks_network_load(o.net.c_str(), &n), o.net.c_str());
    return Network(n);
}

void print_report(const ks_run* run, const Options& o) {
    if (const char* w = ks_run_warning(run)) std::cerr << w << "\n";
    char* text = nullptr;
    check(ks_run_render(run, format_of(o), &text), "report");
    Text owned(text);
    std::fputs(text, stdout);
}

Tensor make_input(const ks_network* net, const Options& o) {
    ks_tensor* t = nullptr;
    if (!o.input.empty()) {
        check(ks_tensor_load(o.input.c_str(), &t), o.input.c_str());
    } else {
        ks_layer_info l0;
        check(ks_network_layer(net, 0, &l0), "network");
        check(ks_tensor_random(l0.in_c, l0.in_h, l0.in_w, o.seed, &t), "input");
    }
    return Tensor(t);
}

Weights make_weights(const ks_network* net, const Options& o) {
    ks_weights* w = nullptr;
    if (!o.weights.empty())
        check(ks_weights_load(o.weights.c_str(), net, &w), o.weights.c_str());
    else
        check(ks_weights_random(net, o.seed + 1, &w), "weights");
    return Weights(w);
}

void save_outputs(const ks_run* run, const Options& o) {
    if (o.out.empty()) return;
    check(ks_run_save(run, o.out.c_str()), o.out.c_str());
    ks_tensor* t = nullptr;
    check(ks_run_output(run, &t), "output");
    Tensor owned(t);
    const std::string fxt = o.out + ".fxt";
    check(ks_tensor_store(t, fxt.c_str()), fxt.c_str());
}

int cmd_plan(const Options& o) {
    Network net = load_net(o);
    const ks_config cfg = make_config(o);
    ks_run* r = nullptr;
    check(ks_plan(net.get(), &cfg, &r), "plan");
    Run run(r);
    print_report(r, o);
    if (!o.out.empty()) {
        char* csv = nullptr;
        check(ks_run_render_plan_csv(r, &csv), "plan csv");
        Text owned(csv);
        std::FILE* f = std::fopen(o.out.c_str(), "w");
        if (!f || std::fputs(csv, f) < 0 || std::fclose(f) != 0) {
            std::cerr << "kstream-cli: cannot write " << o.out << "\n";
            throw Failure{kIo};
        }
    }
    return kOk;
}

int cmd_run(const Options& o, bool verify) {
    Network net = load_net(o);
    const ks_config cfg = make_config(o);
    Tensor input = make_input(net.get(), o);
    Weights weights = make_weights(net.get(), o);
    ks_run* r = nullptr;
    int32_t bad_layer = -1;
    const ks_status s = verify ? ks_verify_network(net.get(), input.get(), weights.get(), &cfg, &r, &bad_layer)
                               : ks_run_network(net.get(), input.get(), weights.get(), &cfg, &r);
    Run run(r);
    if (s == KS_ERR_MISMATCH && r) {
        print_report(r, o);
        std::cerr << "kstream-cli: verify: MISMATCH: " << ks_last_error() << "\n";
        return kMismatch;
    }
    check(s, verify ? "verify" : "run");
    print_report(r, o);
    save_outputs(r, o);
    if (verify) std::cerr << "verify: outputs match the reference bit for bit\n";
    return kOk;
}

int cmd_report(const Options& o) {
    ks_run* r = nullptr;
    check(ks_run_load(o.run_path.c_str(), &r), o.run_path.c_str());
    Run run(r);
    print_report(r, o);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"kstream-cli: streaming CNN accelerator simulator"};
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sc) {
        sc->add_option("--sram-kb", o.sram_kb, "on-chip buffer size in KiB")->check(CLI::PositiveNumber);
        sc->add_option("--freq-mhz", o.freq_mhz, "clock frequency")->check(CLI::PositiveNumber);
        sc->add_option("--power-mw", o.power_mw, "total power (default: measured value for the clock, if any)")
            ->check(CLI::PositiveNumber);
        sc->add_option("--tile", o.tile, "force GX,GY,F for every layer");
        sc->add_option("--format", o.format, "report format")->check(CLI::IsMember({"text", "csv"}));
        sc->add_option("--seed", o.seed, "seed for synthesized input and weights");
    };
    auto data = [&](CLI::App* sc) {
        sc->add_option("--input", o.input, "input tensor (FXT3); random from --seed when omitted");
        auto* w = sc->add_option("--weights", o.weights, "weight file (FXW4 records); random when omitted");
        sc->add_flag("--random-weights", o.random_weights, "synthesize weights from --seed")->excludes(w);
        sc->add_option("--out", o.out, "write the run record (JSON) and <out>.fxt");
    };

    CLI::App* plan = app.add_subcommand("plan", "decompose every layer and print the plan report");
    plan->add_option("--net", o.net, "network description")->required();
    common(plan);
    plan->add_option("--out", o.out, "write the planner CSV");

    CLI::App* run = app.add_subcommand("run", "simulate the network and print counters");
    run->add_option("--net", o.net, "network description")->required();
    common(run);
    data(run);

    CLI::App* verify = app.add_subcommand("verify", "simulate and diff against the reference, bit for bit");
    verify->add_option("--net", o.net, "network description")->required();
    common(verify);
    data(verify);

    CLI::App* report = app.add_subcommand("report", "re-render a saved run record");
    report->add_option("run", o.run_path, "run record written by run --out")->required();
    report->add_option("--format", o.format, "report format")->check(CLI::IsMember({"text", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "kstream-cli: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    try {
        if (*plan) return cmd_plan(o);
        if (*run) return cmd_run(o, false);
        if (*verify) return cmd_run(o, true);
        return cmd_report(o);
    } catch (const Failure& f) {
        return f.code;
    }
}
