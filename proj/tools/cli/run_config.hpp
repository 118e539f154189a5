#pragma once

#include <filesystem>
#include <string>

#include "qbe/eval/twv.hpp"
#include "qbe/mfcc/mfcc.hpp"
#include "qbe/search/dtw_search.hpp"

namespace qbe::cli {

/// Everything a pipeline run needs. Loaded from JSON; command-line flags
/// override individual fields afterwards.
///
/// Schema (all keys optional; relative paths resolve against the config file):
///   {
///     "queries": "queries.tsv", "items": "items.tsv", "gold": "gold.tsv",
///     "out": "run/", "system_tag": "mfcc39", "dataset_id": "eng-mav",
///     "workers": 4,
///     "search": {"window_stride_frames": 1, "window_scale": 1.0, "variance_floor": 1e-8},
///     "eval": {"cost_fa": 1.0, "cost_miss": 10.0, "p_target": 0.0278,
///              "per_query_threshold": "query" | "global"},
///     "mfcc": {"sample_rate_hz": 8000, "frame_length_ms": 25.0, "frame_shift_ms": 10.0,
///              "num_mel_filters": 23, "num_cepstra": 13, "low_freq_hz": 20.0,
///              "high_freq_hz": 3900.0, "pre_emphasis": 0.97, "delta_window": 2,
///              "decimate_16k": true}
///   }
struct RunConfig {
    search::SearchConfig search;
    eval::EvalConfig eval;
    mfcc::MfccConfig mfcc;
    bool decimate_16k = true;

    std::filesystem::path queries;
    std::filesystem::path items;
    std::filesystem::path gold;
    std::filesystem::path out_dir;
    std::string system_tag;
    std::string dataset_id;
    unsigned workers = 0;  // 0: available parallelism
};

/// Throws ConfigError on malformed JSON, unknown keys, or values of the wrong type.
RunConfig load_run_config(const std::filesystem::path& path);

unsigned default_workers();

}  // namespace qbe::cli
