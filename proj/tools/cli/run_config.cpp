#include "run_config.hpp"

#include <fstream>
#include <set>
#include <thread>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "qbe/error.hpp"

namespace qbe::cli {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key)) throw ConfigError(fmt::format("unknown config key '{}{}'", where, key));
}

template <typename T>
void read_opt(const json& j, const char* key, T& dst, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(fmt::format("config key '{}{}' has the wrong type", where, key));
    }
}

void read_path(const json& j, const char* key, std::filesystem::path& dst, const std::filesystem::path& base) {
    std::string s;
    read_opt(j, key, s, "");
    if (s.empty()) return;
    std::filesystem::path p(s);
    dst = p.is_absolute() || base.empty() ? p : base / p;
}

}  // namespace

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!j.is_object()) throw ConfigError(fmt::format("{}: top level must be an object", path.string()));
    reject_unknown(j, {"queries", "items", "gold", "out", "system_tag", "dataset_id", "workers", "search", "eval", "mfcc"},
                   "");

    RunConfig cfg;
    const auto base = path.parent_path();
    read_path(j, "queries", cfg.queries, base);
    read_path(j, "items", cfg.items, base);
    read_path(j, "gold", cfg.gold, base);
    read_path(j, "out", cfg.out_dir, base);
    read_opt(j, "system_tag", cfg.system_tag, "");
    read_opt(j, "dataset_id", cfg.dataset_id, "");
    read_opt(j, "workers", cfg.workers, "");

    if (j.contains("search")) {
        const auto& s = j["search"];
        reject_unknown(s, {"window_stride_frames", "window_scale", "variance_floor"}, "search.");
        read_opt(s, "window_stride_frames", cfg.search.window_stride_frames, "search.");
        read_opt(s, "window_scale", cfg.search.window_scale, "search.");
        read_opt(s, "variance_floor", cfg.search.variance_floor, "search.");
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        reject_unknown(e, {"cost_fa", "cost_miss", "p_target", "per_query_threshold"}, "eval.");
        read_opt(e, "cost_fa", cfg.eval.cost_fa, "eval.");
        read_opt(e, "cost_miss", cfg.eval.cost_miss, "eval.");
        read_opt(e, "p_target", cfg.eval.p_target, "eval.");
        std::string mode = "query";
        read_opt(e, "per_query_threshold", mode, "eval.");
        if (mode == "query")
            cfg.eval.per_query = eval::PerQueryThreshold::kQueryOptimal;
        else if (mode == "global")
            cfg.eval.per_query = eval::PerQueryThreshold::kGlobal;
        else
            throw ConfigError(fmt::format("eval.per_query_threshold must be 'query' or 'global', got '{}'", mode));
    }
    if (j.contains("mfcc")) {
        const auto& m = j["mfcc"];
        reject_unknown(m, {"sample_rate_hz", "frame_length_ms", "frame_shift_ms", "num_mel_filters", "num_cepstra",
                           "low_freq_hz", "high_freq_hz", "pre_emphasis", "delta_window", "decimate_16k"},
                       "mfcc.");
        read_opt(m, "sample_rate_hz", cfg.mfcc.sample_rate_hz, "mfcc.");
        read_opt(m, "frame_length_ms", cfg.mfcc.frame_length_ms, "mfcc.");
        read_opt(m, "frame_shift_ms", cfg.mfcc.frame_shift_ms, "mfcc.");
        read_opt(m, "num_mel_filters", cfg.mfcc.num_mel_filters, "mfcc.");
        read_opt(m, "num_cepstra", cfg.mfcc.num_cepstra, "mfcc.");
        read_opt(m, "low_freq_hz", cfg.mfcc.low_freq_hz, "mfcc.");
        if (m.contains("high_freq_hz")) {
            double hf = 0.0;
            read_opt(m, "high_freq_hz", hf, "mfcc.");
            cfg.mfcc.high_freq_hz = hf;
        }
        read_opt(m, "pre_emphasis", cfg.mfcc.pre_emphasis, "mfcc.");
        read_opt(m, "delta_window", cfg.mfcc.delta_window, "mfcc.");
        read_opt(m, "decimate_16k", cfg.decimate_16k, "mfcc.");
    }
    cfg.search.validate();
    cfg.eval.validate();
    cfg.mfcc.validate();
    return cfg;
}

}  // namespace qbe::cli
