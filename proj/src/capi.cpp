#include "reltask.h"

#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "reltask/experiment.hpp"
#include "reltask/task.hpp"

using reltask::Error;
using reltask::ErrorKind;

struct rt_task {
  reltask::TemplateTask task;
};

struct rt_dataset {
  reltask::Dataset dataset;
};

namespace {

thread_local std::string g_last_error;

rt_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kArgument: return RT_ERR_ARGUMENT;
    case ErrorKind::kDimension: return RT_ERR_ARGUMENT;
    case ErrorKind::kContract: return RT_ERR_CONTRACT;
    case ErrorKind::kValidation: return RT_ERR_VALIDATION;
    case ErrorKind::kSingular: return RT_ERR_SINGULAR;
    case ErrorKind::kDivergence: return RT_ERR_DIVERGED;
    case ErrorKind::kIo: return RT_ERR_IO;
    case ErrorKind::kInternal: return RT_ERR_INTERNAL;
  }
  return RT_ERR_INTERNAL;
}

template <typename Fn>
rt_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return RT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return RT_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

rt_status require(bool cond, const char* what) {
  if (cond) return RT_OK;
  g_last_error = what;
  return RT_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* rt_status_name(rt_status status) {
  switch (status) {
    case RT_OK: return "ok";
    case RT_ERR_ARGUMENT: return "argument";
    case RT_ERR_VALIDATION: return "validation";
    case RT_ERR_CONTRACT: return "contract";
    case RT_ERR_SINGULAR: return "singular";
    case RT_ERR_DIVERGED: return "diverged";
    case RT_ERR_IO: return "io";
    case RT_ERR_PARTIAL: return "partial";
    case RT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* rt_last_error(void) { return g_last_error.c_str(); }

const char* rt_version(void) { return reltask::kVersion; }

void rt_string_free(char* s) { delete[] s; }

rt_status rt_task_builtin(const char* kind, const char* params_json,
                          rt_task** out) {
  if (auto st = require(kind && out, "rt_task_builtin: null argument"))
    return st;
  return guarded([&]() {
    const auto builtin = reltask::builtin_from_name(kind);
    if (!builtin) {
      g_last_error = std::string("unknown builtin task: ") + kind;
      return RT_ERR_ARGUMENT;
    }
    reltask::BuiltinParams params;
    if (params_json && *params_json) {
      const auto p = nlohmann::json::parse(params_json);
      params.k = p.value("k", params.k);
      params.r = p.value("r", params.r);
      params.n_wildcards = p.value("n_wildcards", params.n_wildcards);
      params.n_regular = p.value("n_regular", params.n_regular);
      params.seed = p.value("seed", params.seed);
      params.disjoint = p.value("disjoint", params.disjoint);
      params.vocab_size = p.value("vocab_size", params.vocab_size);
    }
    *out = new rt_task{reltask::make_builtin(*builtin, params)};
    return RT_OK;
  });
}

rt_status rt_task_from_json(const char* json_text, rt_task** out) {
  if (auto st = require(json_text && out, "rt_task_from_json: null argument"))
    return st;
  return guarded([&]() {
    *out = new rt_task{reltask::task_from_json(json_text)};
    return RT_OK;
  });
}

rt_status rt_task_to_json(const rt_task* task, char** out_json) {
  if (auto st = require(task && out_json, "rt_task_to_json: null argument"))
    return st;
  return guarded([&]() {
    *out_json = dup_string(reltask::task_to_json(task->task));
    return RT_OK;
  });
}

rt_status rt_task_template_count(const rt_task* task, int32_t* out) {
  if (auto st = require(task && out, "rt_task_template_count: null argument"))
    return st;
  *out = static_cast<int32_t>(task->task.templates.size());
  return RT_OK;
}

rt_status rt_task_with_cls(const rt_task* task, rt_task** out) {
  if (auto st = require(task && out, "rt_task_with_cls: null argument"))
    return st;
  return guarded([&]() {
    *out = new rt_task{reltask::with_cls(task->task)};
    return RT_OK;
  });
}

rt_status rt_task_diversity(const rt_task* task, int32_t alphabet_lo,
                            int32_t alphabet_hi, double* out) {
  if (auto st = require(task && out, "rt_task_diversity: null argument"))
    return st;
  return guarded([&]() {
    *out = reltask::data_diversity(task->task, {alphabet_lo, alphabet_hi});
    return RT_OK;
  });
}

void rt_task_free(rt_task* task) { delete task; }

rt_status rt_dataset_sample(const rt_task* task, size_t n, int32_t alphabet_lo,
                            int32_t alphabet_hi, uint64_t seed,
                            rt_dataset** out) {
  if (auto st = require(task && out, "rt_dataset_sample: null argument"))
    return st;
  return guarded([&]() {
    *out = new rt_dataset{reltask::sample_dataset(
        task->task, n, {alphabet_lo, alphabet_hi}, seed)};
    return RT_OK;
  });
}

rt_status rt_dataset_size(const rt_dataset* ds, size_t* out) {
  if (auto st = require(ds && out, "rt_dataset_size: null argument")) return st;
  *out = ds->dataset.size();
  return RT_OK;
}

rt_status rt_dataset_to_csv(const rt_dataset* ds, const char* manifest_hash,
                            char** out_csv) {
  if (auto st = require(ds && out_csv, "rt_dataset_to_csv: null argument"))
    return st;
  return guarded([&]() {
    *out_csv = dup_string(reltask::dataset_to_csv(
        ds->dataset, manifest_hash ? manifest_hash : ""));
    return RT_OK;
  });
}

void rt_dataset_free(rt_dataset* ds) { delete ds; }

rt_status rt_run_command(const char* command, const char* config_json,
                         char** out_report_json) {
  if (auto st = require(command != nullptr, "rt_run_command: null command"))
    return st;
  return guarded([&]() {
    const reltask::CommandResult result = reltask::run_command(
        command, config_json ? std::string(config_json) : std::string("{}"));
    if (out_report_json) *out_report_json = dup_string(result.report_json);
    if (result.exit_code == 1) {
      g_last_error = "some cells failed; see report";
      return RT_ERR_PARTIAL;
    }
    if (result.exit_code != 0) {
      g_last_error = "command failed; see report";
      return RT_ERR_INTERNAL;
    }
    return RT_OK;
  });
}

}  // extern "C"
