// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#include "kstream/kstream.h"

#include "kstream/errors.hpp"
#include "kstream/runner.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct ks_network {
    kstream::NetworkSpec spec;
};
struct ks_tensor {
    kstream::Tensor3D t;
};
struct ks_weights {
    std::vector<kstream::FilterSet> layers;
};
struct ks_run {
    kstream::RunRecord record;
    std::optional<kstream::Tensor3D> output;
    std::string warning;
};

namespace {

thread_local std::string g_last_error;

ks_status fail(ks_status s, std::string msg) {
    g_last_error = std::move(msg);
    return s;
}

ks_status status_of(kstream::ErrorKind k) {
    using kstream::ErrorKind;
    switch (k) {
    case ErrorKind::InvalidArgument: return KS_ERR_INVALID_ARGUMENT;
    case ErrorKind::Parse: return KS_ERR_PARSE;
    case ErrorKind::Dimension: return KS_ERR_DIMENSION;
    case ErrorKind::Io: return KS_ERR_IO;
    case ErrorKind::Infeasible: return KS_ERR_INFEASIBLE;
    case ErrorKind::Capacity: return KS_ERR_CAPACITY;
    case ErrorKind::SimulationFault: return KS_ERR_SIMULATION;
    case ErrorKind::Mismatch: return KS_ERR_MISMATCH;
    }
    return KS_ERR_INTERNAL;
}

template <class F>
ks_status guarded(F&& f) noexcept {
    try {
        return f();
    } catch (const kstream::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(KS_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(KS_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(KS_ERR_INTERNAL, "unknown exception");
    }
}

#define KS_REQUIRE(cond)                                                          \
    do {                                                                          \
        if (!(cond)) return fail(KS_ERR_INVALID_ARGUMENT, "null argument: " #cond); \
    } while (0)

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

kstream::RunOptions options_of(const ks_config* cfg) {
    ks_config d;
    ks_config_default(&d);
    const ks_config& c = cfg ? *cfg : d;
    kstream::RunOptions o;
    if (c.feature_parallel <= 0 || kstream::kCuEngines % c.feature_parallel != 0)
        throw kstream::Error(kstream::ErrorKind::InvalidArgument, "feature_parallel must divide 16");
    o.datapath.feature_parallel = c.feature_parallel;
    o.datapath.column_parallel = kstream::kCuEngines / c.feature_parallel;
    o.datapath.pipeline_depth = c.pipeline_depth;
    o.datapath.sram_bytes = static_cast<std::size_t>(c.sram_bytes);
    o.datapath.validate();
    if (c.tile_gx > 0 || c.tile_gy > 0 || c.tile_f > 0) {
        if (c.tile_gx <= 0 || c.tile_gy <= 0 || c.tile_f <= 0)
            throw kstream::Error(kstream::ErrorKind::InvalidArgument, "tile needs gx, gy and f all positive");
        o.tile = std::array<int, 3>{c.tile_gx, c.tile_gy, c.tile_f};
    }
    if (!(c.freq_mhz > 0)) throw kstream::Error(kstream::ErrorKind::InvalidArgument, "frequency must be positive");
    o.profile = kstream::measured_profile(c.freq_mhz);
    if (c.power_mw > 0) o.profile.power_mw = c.power_mw;
    return o;
}

ks_run* new_run(kstream::RunRecord rec) {
    auto* r = new ks_run{std::move(rec), std::nullopt, {}};
    if (auto w = kstream::envelope_warning(r->record.profile)) r->warning = *w;
    return r;
}

} // namespace

extern "C" {

const char* ks_last_error(void) {
    return g_last_error.c_str();
}

const char* ks_status_name(ks_status s) {
    switch (s) {
    case KS_OK: return "ok";
    case KS_ERR_INVALID_ARGUMENT: return "invalid argument";
    case KS_ERR_PARSE: return "parse error";
    case KS_ERR_DIMENSION: return "dimension error";
    case KS_ERR_IO: return "I/O error";
    case KS_ERR_INFEASIBLE: return "infeasible";
    case KS_ERR_CAPACITY: return "capacity exceeded";
    case KS_ERR_SIMULATION: return "simulation fault";
    case KS_ERR_MISMATCH: return "mismatch";
    case KS_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void ks_string_free(char* s) {
    std::free(s);
}

void ks_config_default(ks_config* cfg) {
    if (!cfg) return;
    *cfg = ks_config{};
    cfg->sram_bytes = kstream::kSramBytes;
    cfg->freq_mhz = 500.0;
    cfg->power_mw = 0.0;
    cfg->feature_parallel = 2;
    cfg->pipeline_depth = 3;
}

ks_status ks_network_load(const char* path, ks_network** out) {
    KS_REQUIRE(path && out);
    return guarded([&] {
        *out = new ks_network{kstream::load_network(path)};
        return KS_OK;
    });
}

ks_status ks_network_parse(const char* text, ks_network** out) {
    KS_REQUIRE(text && out);
    return guarded([&] {
        *out = new ks_network{kstream::parse_network(text)};
        return KS_OK;
    });
}

void ks_network_free(ks_network* net) {
    delete net;
}

size_t ks_network_layer_count(const ks_network* net) {
    return net ? net->spec.layers.size() : 0;
}

ks_status ks_network_layer(const ks_network* net, size_t index, ks_layer_info* out) {
    KS_REQUIRE(net && out);
    if (index >= net->spec.layers.size()) return fail(KS_ERR_INVALID_ARGUMENT, "layer index out of range");
    return guarded([&] {
        const kstream::ConvLayerSpec& l = net->spec.layers[index];
        const kstream::Dims3 fd = kstream::final_dims(l);
        ks_layer_info i{};
        i.in_w = l.in_w;
        i.in_h = l.in_h;
        i.in_c = l.in_c;
        i.out_c = l.out_c;
        i.kernel = l.kernel;
        i.stride = l.stride;
        i.pad = l.pad;
        i.groups = l.groups;
        i.has_bias = l.has_bias;
        i.pool_kernel = l.pool ? l.pool->kernel : 0;
        i.pool_stride = l.pool ? l.pool->stride : 0;
        i.out_w = fd.w;
        i.out_h = fd.h;
        i.ops = kstream::ops_count(l);
        i.input_bytes = kstream::mem_bytes({l.in_w, l.in_h, l.in_c});
        i.output_bytes = kstream::mem_bytes(kstream::out_dims(l));
        *out = i;
        return KS_OK;
    });
}

ks_status ks_network_render(const ks_network* net, char** out_text) {
    KS_REQUIRE(net && out_text);
    return guarded([&] {
        *out_text = dup_string(kstream::render_network(net->spec));
        return KS_OK;
    });
}

ks_status ks_tensor_load(const char* path, ks_tensor** out) {
    KS_REQUIRE(path && out);
    return guarded([&] {
        *out = new ks_tensor{kstream::load_tensor(path)};
        return KS_OK;
    });
}

ks_status ks_tensor_store(const ks_tensor* t, const char* path) {
    KS_REQUIRE(t && path);
    return guarded([&] {
        kstream::store_tensor(t->t, path);
        return KS_OK;
    });
}

ks_status ks_tensor_random(int32_t c, int32_t h, int32_t w, uint64_t seed, ks_tensor** out) {
    KS_REQUIRE(out);
    if (c <= 0 || h <= 0 || w <= 0) return fail(KS_ERR_INVALID_ARGUMENT, "tensor dims must be positive");
    return guarded([&] {
        *out = new ks_tensor{kstream::random_tensor(c, h, w, seed)};
        return KS_OK;
    });
}

ks_status ks_tensor_dims(const ks_tensor* t, int32_t* c, int32_t* h, int32_t* w) {
    KS_REQUIRE(t);
    if (c) *c = t->t.c();
    if (h) *h = t->t.h();
    if (w) *w = t->t.w();
    return KS_OK;
}

ks_status ks_tensor_data(const ks_tensor* t, const int16_t** bits, size_t* count) {
    KS_REQUIRE(t && bits && count);
    static_assert(sizeof(kstream::Fx16) == sizeof(int16_t));
    *bits = reinterpret_cast<const int16_t*>(t->t.data().data());
    *count = t->t.data().size();
    return KS_OK;
}

int ks_tensor_equal(const ks_tensor* a, const ks_tensor* b) {
    return a && b && a->t == b->t;
}

void ks_tensor_free(ks_tensor* t) {
    delete t;
}

ks_status ks_weights_load(const char* path, const ks_network* net, ks_weights** out) {
    KS_REQUIRE(path && out);
    return guarded([&] {
        auto layers = kstream::load_filters(path);
        if (net) {
            if (layers.size() != net->spec.layers.size()) {
                throw kstream::DimensionError("weight file holds " + std::to_string(layers.size()) +
                                              " layers, network has " + std::to_string(net->spec.layers.size()));
            }
            for (std::size_t i = 0; i < layers.size(); ++i) layers[i].check_matches(net->spec.layers[i]);
        }
        *out = new ks_weights{std::move(layers)};
        return KS_OK;
    });
}

ks_status ks_weights_store(const ks_weights* w, const char* path) {
    KS_REQUIRE(w && path);
    return guarded([&] {
        kstream::store_filters(w->layers, path);
        return KS_OK;
    });
}

ks_status ks_weights_random(const ks_network* net, uint64_t seed, ks_weights** out) {
    KS_REQUIRE(net && out);
    return guarded([&] {
        *out = new ks_weights{kstream::random_network_filters(net->spec, seed)};
        return KS_OK;
    });
}

void ks_weights_free(ks_weights* w) {
    delete w;
}

ks_status ks_plan(const ks_network* net, const ks_config* cfg, ks_run** out) {
    KS_REQUIRE(net && out);
    return guarded([&] {
        *out = new_run(kstream::plan_only(net->spec, options_of(cfg)));
        return KS_OK;
    });
}

ks_status ks_run_network(const ks_network* net, const ks_tensor* input, const ks_weights* weights,
                         const ks_config* cfg, ks_run** out) {
    KS_REQUIRE(net && input && weights && out);
    return guarded([&] {
        auto res = kstream::run_network(net->spec, input->t, weights->layers, options_of(cfg));
        ks_run* r = new_run(std::move(res.record));
        r->output = std::move(res.layer_outputs.back());
        *out = r;
        return KS_OK;
    });
}

ks_status ks_verify_network(const ks_network* net, const ks_tensor* input, const ks_weights* weights,
                            const ks_config* cfg, ks_run** out, int32_t* mismatch_layer) {
    KS_REQUIRE(net && input && weights && out);
    return guarded([&] {
        auto v = kstream::verify_network(net->spec, input->t, weights->layers, options_of(cfg));
        ks_run* r = new_run(std::move(v.run.record));
        r->output = std::move(v.run.layer_outputs.back());
        *out = r;
        if (mismatch_layer) *mismatch_layer = v.first_mismatch_layer;
        if (!v.match()) {
            return fail(KS_ERR_MISMATCH, "layer " + std::to_string(v.first_mismatch_layer + 1) + ": " +
                                             std::to_string(v.mismatched_values) + " values differ from the reference");
        }
        return KS_OK;
    });
}

ks_status ks_run_output(const ks_run* run, ks_tensor** out) {
    KS_REQUIRE(run && out);
    if (!run->output) return fail(KS_ERR_INVALID_ARGUMENT, "run has no simulated output");
    return guarded([&] {
        *out = new ks_tensor{*run->output};
        return KS_OK;
    });
}

ks_status ks_run_totals(const ks_run* run, ks_counters* out) {
    KS_REQUIRE(run && out);
    const kstream::PerfCounters c = run->record.totals();
    *out = {c.cycles, c.macs_executed, c.sram_reads, c.sram_writes, c.dram_bytes_in, c.dram_bytes_out, c.stall_cycles,
            c.commands_executed};
    return KS_OK;
}

ks_status ks_run_throughput(const ks_run* run, ks_throughput* out) {
    KS_REQUIRE(run && out);
    if (!run->record.simulated()) return fail(KS_ERR_INVALID_ARGUMENT, "run has no counters");
    return guarded([&] {
        const auto t = kstream::gops(run->record.totals(), run->record.profile.freq_mhz);
        *out = {t.achieved_gops, t.peak_gops, kstream::energy_efficiency(t.achieved_gops, run->record.profile)};
        return KS_OK;
    });
}

ks_status ks_run_render(const ks_run* run, ks_format fmt, char** out_text) {
    KS_REQUIRE(run && out_text);
    return guarded([&] {
        const auto f = fmt == KS_FORMAT_CSV ? kstream::ReportFormat::Csv : kstream::ReportFormat::Text;
        *out_text = dup_string(kstream::render_report(run->record, f));
        return KS_OK;
    });
}

ks_status ks_run_render_plan_csv(const ks_run* run, char** out_text) {
    KS_REQUIRE(run && out_text);
    return guarded([&] {
        *out_text = dup_string(kstream::render_plan_csv(run->record));
        return KS_OK;
    });
}

ks_status ks_run_save(const ks_run* run, const char* path) {
    KS_REQUIRE(run && path);
    return guarded([&] {
        kstream::save_run(run->record, path);
        return KS_OK;
    });
}

ks_status ks_run_load(const char* path, ks_run** out) {
    KS_REQUIRE(path && out);
    return guarded([&] {
        *out = new_run(kstream::load_run(path));
        return KS_OK;
    });
}

const char* ks_run_warning(const ks_run* run) {
    return run && !run->warning.empty() ? run->warning.c_str() : nullptr;
}

void ks_run_free(ks_run* run) {
    delete run;
}

double ks_peak_gops(double freq_mhz) {
    return kstream::peak_gops(freq_mhz);
}

double ks_energy_efficiency(double gops, double power_mw) {
    kstream::PowerProfile p;
    p.power_mw = power_mw;
    return kstream::energy_efficiency(gops, p);
}

} // extern "C"
