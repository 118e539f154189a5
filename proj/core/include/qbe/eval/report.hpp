#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qbe/eval/stats.hpp"
#include "qbe/eval/twv.hpp"

namespace qbe::eval {

struct SystemResult {
    std::string tag;  // e.g. "mfcc39", "ls960-t11"
    MtwvResult result;
};

/// H1: per-query MTWV of `better` > `baseline`.
struct Comparison {
    std::string better;
    std::string baseline;
    std::size_t n_queries = 0;
    TTestResult test;
};

struct Report {
    std::string dataset_id;
    EvalConfig config;
    std::vector<SystemResult> systems;
    std::vector<Comparison> comparisons;
};

/// Per-query MTWVs of both systems, paired by query id. Throws
/// EvaluationError listing the symmetric difference when query sets differ.
Comparison compare_systems(const SystemResult& better, const SystemResult& baseline);

/// Writes `<out_dir>/report.json` and `<out_dir>/summary.csv`.
void write_report(const Report& report, const std::filesystem::path& out_dir);

/// JSON only / CSV only, for callers that pick their own file names.
void write_report_json(const Report& report, const std::filesystem::path& path);
void write_summary_csv(const Report& report, const std::filesystem::path& path);

Report read_report_json(const std::filesystem::path& path);

}  // namespace qbe::eval
