/*
 * Copyright (c) 2026 The ercfuse Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the ercfuse library. All functions return an ercf_status;
 * on failure ercf_last_error() describes the problem. Strings returned via
 * `char**` out-parameters are owned by the caller and released with
 * ercf_string_free(). Handles are released with their *_free function. */

#ifndef ERCFUSE_H
#define ERCFUSE_H

#include <stddef.h>
#include <stdint.h>

#if defined(ERCF_BUILDING_LIBRARY)
#define ERCF_API __attribute__((visibility("default")))
#else
#define ERCF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ercf_status {
  ERCF_OK = 0,
  ERCF_CHECK_FAILED = 1, /* a verification ran and did not pass */
  ERCF_USER_ERROR = 2,   /* bad config, data, path or argument */
  ERCF_NUMERICAL = 3,    /* non-finite values during training or inference */
  ERCF_INTERNAL = 4
} ercf_status;

typedef struct ercf_dataset ercf_dataset;
typedef struct ercf_config ercf_config;
typedef struct ercf_model ercf_model;

typedef struct ercf_synth_options {
  uint64_t seed;
  int num_conversations;
  int min_length;
  int max_length;
  int num_classes;
  int num_speakers;
  int dims[3]; /* text, audio, visual */
  double separation;
  double persistence;
  double speaker_bias;
  double mood;
  double ambiguity;
  double noise;
} ercf_synth_options;

typedef struct ercf_gradcheck_options {
  uint64_t seed;
  int utterances;
  int speakers;
  int classes;
  int dim;
  int heads;
  int mdgat_layers;
  int mpcat_layers;
  int window_past;
  int window_future;
  const char* update_rule;       /* "sum", "concat", "sum_product" */
  double step;
  double tolerance;
  const char* corrupt_parameter; /* test hook, NULL for none */
} ercf_gradcheck_options;

ERCF_API const char* ercf_version(void);
/* Message of the last failure on the calling thread; "" if none. */
ERCF_API const char* ercf_last_error(void);
ERCF_API void ercf_string_free(char* s);

/* Datasets */
ERCF_API void ercf_synth_options_default(ercf_synth_options* options);
ERCF_API ercf_status ercf_dataset_synth(const ercf_synth_options* options, ercf_dataset** out);
ERCF_API ercf_status ercf_dataset_load(const char* path, ercf_dataset** out);
ERCF_API ercf_status ercf_dataset_save(const ercf_dataset* dataset, const char* path);
/* {"conversations":..,"utterances":..,"classes":..,"histogram":[..]} */
ERCF_API ercf_status ercf_dataset_summary(const ercf_dataset* dataset, char** json);
/* Splits by conversation in order; any output pointer may be NULL. */
ERCF_API ercf_status ercf_dataset_split(const ercf_dataset* dataset, double train_fraction, double valid_fraction,
                                        ercf_dataset** train, ercf_dataset** valid, ercf_dataset** test);
ERCF_API void ercf_dataset_free(ercf_dataset* dataset);

/* Configuration: model hyperparameters plus data paths. `profile` is NULL
 * (library defaults), "iemocap" or "meld". */
ERCF_API ercf_status ercf_config_new(const char* profile, ercf_config** out);
/* Applies a `key = value` file on top of `config`; paths resolve against the file. */
ERCF_API ercf_status ercf_config_load(ercf_config* config, const char* path);
ERCF_API ercf_status ercf_config_set(ercf_config* config, const char* key, const char* value);
/* key: data, train_data, valid_data, test_data, out_dir. Empty when unset. */
ERCF_API ercf_status ercf_config_get_path(const ercf_config* config, const char* key, char** path);
ERCF_API ercf_status ercf_config_to_json(const ercf_config* config, char** json);
ERCF_API void ercf_config_free(ercf_config* config);

/* Training and evaluation. `valid` may be NULL. Progress goes to stderr when
 * `verbose` is nonzero. */
ERCF_API ercf_status ercf_train(const ercf_config* config, const ercf_dataset* train, const ercf_dataset* valid,
                                int verbose, ercf_model** out);
ERCF_API ercf_status ercf_model_history_csv(const ercf_model* model, char** csv);
ERCF_API ercf_status ercf_model_info(const ercf_model* model, char** json);
ERCF_API ercf_status ercf_model_save(const ercf_model* model, const char* path);
ERCF_API ercf_status ercf_model_load(const char* path, ercf_model** out);
/* Either output may be NULL. */
ERCF_API ercf_status ercf_model_evaluate(const ercf_model* model, const ercf_dataset* dataset, char** report_json,
                                         char** confusion_csv);
ERCF_API void ercf_model_free(ercf_model* model);

/* axis: windows, layers, lambda, update_rule, modalities. */
ERCF_API ercf_status ercf_sweep(const ercf_config* config, const char* axis, const char* const* values,
                                size_t num_values, const ercf_dataset* train, const ercf_dataset* valid,
                                const ercf_dataset* test, int threads, char** csv);

ERCF_API void ercf_gradcheck_options_default(ercf_gradcheck_options* options);
/* ERCF_CHECK_FAILED when any parameter exceeds the tolerance; the report is
 * written in either case. */
ERCF_API ercf_status ercf_gradcheck(const ercf_gradcheck_options* options, char** report_json);

ERCF_API ercf_status ercf_inspect_graph(int64_t m, int64_t past, int64_t future, char** json);

#ifdef __cplusplus
}
#endif

#endif
