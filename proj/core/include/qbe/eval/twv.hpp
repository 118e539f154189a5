#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qbe/eval/gold.hpp"
#include "qbe/search/dtw_search.hpp"

namespace qbe::eval {

using search::DetectionScore;

enum class PerQueryThreshold {
    kQueryOptimal,  // each query swept over its own thresholds
    kGlobal,        // each query evaluated at the pooled optimal threshold
};

struct EvalConfig {
    double cost_fa = 1.0;
    double cost_miss = 10.0;
    double p_target = 0.0278;
    PerQueryThreshold per_query = PerQueryThreshold::kQueryOptimal;

    /// (cost_fa / cost_miss) * (1 / p_target - 1)
    double beta() const { return cost_fa / cost_miss * (1.0 / p_target - 1.0); }
    void validate() const;
};

struct TwvPoint {
    double threshold = 0.0;
    double p_miss = 0.0;
    double p_fa = 0.0;
    double twv = 0.0;
};

struct MtwvResult {
    double mtwv = 0.0;
    /// Smallest threshold attaining the maximum; empty when no threshold
    /// beats returning nothing (mtwv clamped to 0).
    std::optional<double> optimal_threshold;
    std::vector<TwvPoint> curve;
    std::map<std::string, double> per_query_mtwv;
    /// Queries with no true occurrence; excluded from all averages.
    std::vector<std::string> excluded_queries;
    PerQueryThreshold per_query_mode = PerQueryThreshold::kQueryOptimal;
};

/// Scores indexed onto the gold grid. Throws EvaluationError when the
/// pair sets differ; lists up to 10 missing pairs.
std::vector<double> align_scores(std::span<const DetectionScore> scores, const GoldLabelSet& gold);

/// Pooled TWV at every distinct observed score (detection rule score >= threshold),
/// ordered by increasing threshold. Per-query P_miss and P_fa are averaged
/// (unweighted) over queries with at least one true occurrence; a query
/// that occurs in every item contributes P_fa = 0.
/// Throws EvaluationError when there are no true labels at all.
std::vector<TwvPoint> twv_curve(std::span<const DetectionScore> scores, const GoldLabelSet& gold,
                                const EvalConfig& cfg);

/// Pooled TWV at a single threshold.
TwvPoint twv_at(std::span<const DetectionScore> scores, const GoldLabelSet& gold, const EvalConfig& cfg,
                double threshold);

MtwvResult mtwv(std::span<const TwvPoint> curve, std::span<const DetectionScore> scores, const GoldLabelSet& gold,
                const EvalConfig& cfg);

/// twv_curve followed by mtwv.
MtwvResult evaluate(std::span<const DetectionScore> scores, const GoldLabelSet& gold, const EvalConfig& cfg);

}  // namespace qbe::eval
