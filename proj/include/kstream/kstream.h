/*
 * Copyright 2026 The kstream Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface of the kstream accelerator simulator. All objects are opaque
 * handles owned by the caller and released with the matching *_free
 * function. Every fallible call returns a ks_status; on failure
 * ks_last_error() describes the problem (per thread, valid until the next
 * failing call on that thread).
 */
#ifndef KSTREAM_H
#define KSTREAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(KSTREAM_BUILDING)
#    define KS_API __declspec(dllexport)
#  else
#    define KS_API __declspec(dllimport)
#  endif
#else
#  define KS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ks_status {
    KS_OK = 0,
    KS_ERR_INVALID_ARGUMENT = 1,
    KS_ERR_PARSE = 2,
    KS_ERR_DIMENSION = 3,
    KS_ERR_IO = 4,
    KS_ERR_INFEASIBLE = 5,
    KS_ERR_CAPACITY = 6,
    KS_ERR_SIMULATION = 7,
    KS_ERR_MISMATCH = 8,
    KS_ERR_INTERNAL = 9
} ks_status;

typedef enum ks_format { KS_FORMAT_TEXT = 0, KS_FORMAT_CSV = 1 } ks_format;

typedef struct ks_network ks_network;
typedef struct ks_tensor ks_tensor;
typedef struct ks_weights ks_weights;
typedef struct ks_run ks_run;

typedef struct ks_layer_info {
    int32_t in_w, in_h, in_c;
    int32_t out_c;
    int32_t kernel, stride, pad, groups;
    int32_t has_bias;
    int32_t pool_kernel; /* 0 when the layer has no pooling */
    int32_t pool_stride;
    int32_t out_w, out_h; /* after pooling */
    uint64_t ops;
    uint64_t input_bytes, output_bytes;
} ks_layer_info;

typedef struct ks_config {
    uint64_t sram_bytes;     /* default 131072 */
    double freq_mhz;         /* default 500 */
    double power_mw;         /* <= 0: use measured value for freq, if any */
    int32_t tile_gx, tile_gy, tile_f; /* all > 0 forces the split */
    int32_t feature_parallel; /* F, with F * C == 16; default 2 */
    int32_t pipeline_depth;   /* default 3 */
} ks_config;

typedef struct ks_counters {
    uint64_t cycles;
    uint64_t macs_executed;
    uint64_t sram_reads;
    uint64_t sram_writes;
    uint64_t dram_bytes_in;
    uint64_t dram_bytes_out;
    uint64_t stall_cycles;
    uint64_t commands_executed;
} ks_counters;

typedef struct ks_throughput {
    double achieved_gops;
    double peak_gops;
    double tops_per_watt;
} ks_throughput;

KS_API const char* ks_last_error(void);
KS_API const char* ks_status_name(ks_status status);
KS_API void ks_string_free(char* s);

KS_API void ks_config_default(ks_config* cfg);

/* networks */
KS_API ks_status ks_network_load(const char* path, ks_network** out);
KS_API ks_status ks_network_parse(const char* text, ks_network** out);
KS_API void ks_network_free(ks_network* net);
KS_API size_t ks_network_layer_count(const ks_network* net);
KS_API ks_status ks_network_layer(const ks_network* net, size_t index, ks_layer_info* out);
KS_API ks_status ks_network_render(const ks_network* net, char** out_text);

/* tensors */
KS_API ks_status ks_tensor_load(const char* path, ks_tensor** out);
KS_API ks_status ks_tensor_store(const ks_tensor* t, const char* path);
KS_API ks_status ks_tensor_random(int32_t c, int32_t h, int32_t w, uint64_t seed, ks_tensor** out);
KS_API ks_status ks_tensor_dims(const ks_tensor* t, int32_t* c, int32_t* h, int32_t* w);
KS_API ks_status ks_tensor_data(const ks_tensor* t, const int16_t** bits, size_t* count);
KS_API int ks_tensor_equal(const ks_tensor* a, const ks_tensor* b);
KS_API void ks_tensor_free(ks_tensor* t);

/* per-network weight sets */
KS_API ks_status ks_weights_load(const char* path, const ks_network* net, ks_weights** out);
KS_API ks_status ks_weights_store(const ks_weights* w, const char* path);
KS_API ks_status ks_weights_random(const ks_network* net, uint64_t seed, ks_weights** out);
KS_API void ks_weights_free(ks_weights* w);

/* planning, simulation, verification */
KS_API ks_status ks_plan(const ks_network* net, const ks_config* cfg, ks_run** out);
KS_API ks_status ks_run_network(const ks_network* net, const ks_tensor* input,
                                const ks_weights* weights, const ks_config* cfg, ks_run** out);
/* Returns KS_ERR_MISMATCH (with *out still populated) when the datapath and
 * the reference disagree; *mismatch_layer receives the first bad layer or -1. */
KS_API ks_status ks_verify_network(const ks_network* net, const ks_tensor* input,
                                   const ks_weights* weights, const ks_config* cfg, ks_run** out,
                                   int32_t* mismatch_layer);

KS_API ks_status ks_run_output(const ks_run* run, ks_tensor** out);
KS_API ks_status ks_run_totals(const ks_run* run, ks_counters* out);
KS_API ks_status ks_run_throughput(const ks_run* run, ks_throughput* out);
KS_API ks_status ks_run_render(const ks_run* run, ks_format fmt, char** out_text);
KS_API ks_status ks_run_render_plan_csv(const ks_run* run, char** out_text);
KS_API ks_status ks_run_save(const ks_run* run, const char* path);
KS_API ks_status ks_run_load(const char* path, ks_run** out);
/* Envelope warning for the run's operating point, or NULL. Owned by run. */
KS_API const char* ks_run_warning(const ks_run* run);
KS_API void ks_run_free(ks_run* run);

/* metric arithmetic */
KS_API double ks_peak_gops(double freq_mhz);
KS_API double ks_energy_efficiency(double gops, double power_mw);

#ifdef __cplusplus
}
#endif

#endif /* KSTREAM_H */
