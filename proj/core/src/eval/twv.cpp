#include "qbe/eval/twv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

namespace qbe::eval {

void EvalConfig::validate() const {
    if (!(cost_fa > 0.0) || !(cost_miss > 0.0))
        throw ConfigError(fmt::format("costs must be positive (fa {}, miss {})", cost_fa, cost_miss));
    if (!(p_target > 0.0 && p_target < 1.0))
        throw ConfigError(fmt::format("p_target must lie in (0, 1), got {}", p_target));
}

std::vector<double> align_scores(std::span<const DetectionScore> scores, const GoldLabelSet& gold) {
    const std::size_t n_items = gold.item_ids().size();
    std::vector<double> grid(gold.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> unexpected;
    for (const auto& s : scores) {
        if (!gold.contains(s.query_id, s.item_id)) {
            if (unexpected.size() < 10) unexpected.push_back(fmt::format("({}, {})", s.query_id, s.item_id));
            continue;
        }
        grid[gold.query_index(s.query_id) * n_items + gold.item_index(s.item_id)] = s.score;
    }
    if (!unexpected.empty()) {
        std::string list;
        for (const auto& u : unexpected) list += " " + u;
        throw EvaluationError(fmt::format("scores contain pairs absent from the gold labels:{}", list));
    }
    std::vector<std::string> missing;
    std::size_t n_missing = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (std::isnan(grid[k])) {
            ++n_missing;
            if (missing.size() < 10)
                missing.push_back(fmt::format("({}, {})", gold.query_ids()[k / n_items], gold.item_ids()[k % n_items]));
        }
    }
    if (n_missing > 0) {
        std::string list;
        for (const auto& m : missing) list += " " + m;
        throw EvaluationError(fmt::format("{} pairs have no score; first {}:{}", n_missing, missing.size(), list));
    }
    return grid;
}

namespace {

struct QueryCounts {
    std::size_t n_true = 0;
    std::size_t n_false = 0;
};

std::vector<QueryCounts> query_counts(const GoldLabelSet& gold) {
    std::vector<QueryCounts> counts(gold.query_ids().size());
    for (std::size_t q = 0; q < counts.size(); ++q) {
        counts[q].n_true = gold.true_count_at(q);
        counts[q].n_false = gold.item_ids().size() - counts[q].n_true;
    }
    return counts;
}

double fa_rate(std::size_t false_alarms, const QueryCounts& c) {
    return c.n_false == 0 ? 0.0 : static_cast<double>(false_alarms) / static_cast<double>(c.n_false);
}

double miss_rate(std::size_t hits, const QueryCounts& c) {
    return static_cast<double>(c.n_true - hits) / static_cast<double>(c.n_true);
}

TwvPoint make_point(double threshold, double p_miss, double p_fa, double beta) {
    return {threshold, p_miss, p_fa, 1.0 - p_miss - beta * p_fa};
}

}  // namespace

std::vector<TwvPoint> twv_curve(std::span<const DetectionScore> scores, const GoldLabelSet& gold,
                                const EvalConfig& cfg) {
    cfg.validate();
    const auto grid = align_scores(scores, gold);
    const auto counts = query_counts(gold);
    const std::size_t n_items = gold.item_ids().size();
    std::vector<std::size_t> included;
    for (std::size_t q = 0; q < counts.size(); ++q)
        if (counts[q].n_true > 0) included.push_back(q);
    if (included.empty()) throw EvaluationError("evaluation undefined: no query occurs in any item");

    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });

    std::vector<std::size_t> hits(counts.size(), 0), fas(counts.size(), 0);
    const double n_inc = static_cast<double>(included.size());
    const double beta = cfg.beta();
    std::vector<TwvPoint> curve;
    std::size_t k = 0;
    while (k < order.size()) {
        const double threshold = grid[order[k]];
        for (; k < order.size() && grid[order[k]] == threshold; ++k) {
            const std::size_t q = order[k] / n_items;
            if (gold.label_at(q, order[k] % n_items))
                ++hits[q];
            else
                ++fas[q];
        }
        // Recomputed from counts at every threshold so perfect operating
        // points come out exact.
        double miss_sum = 0.0, fa_sum = 0.0;
        for (const std::size_t q : included) {
            miss_sum += miss_rate(hits[q], counts[q]);
            fa_sum += fa_rate(fas[q], counts[q]);
        }
        curve.push_back(make_point(threshold, miss_sum / n_inc, fa_sum / n_inc, beta));
    }
    std::reverse(curve.begin(), curve.end());
    return curve;
}

TwvPoint twv_at(std::span<const DetectionScore> scores, const GoldLabelSet& gold, const EvalConfig& cfg,
                double threshold) {
    cfg.validate();
    const auto grid = align_scores(scores, gold);
    const auto counts = query_counts(gold);
    const std::size_t n_items = gold.item_ids().size();
    double miss_sum = 0.0, fa_sum = 0.0;
    std::size_t n_inc = 0;
    for (std::size_t q = 0; q < counts.size(); ++q) {
        if (counts[q].n_true == 0) continue;
        ++n_inc;
        std::size_t hit = 0, fa = 0;
        for (std::size_t i = 0; i < n_items; ++i) {
            if (grid[q * n_items + i] >= threshold) (gold.label_at(q, i) ? hit : fa)++;
        }
        miss_sum += miss_rate(hit, counts[q]);
        fa_sum += fa_rate(fa, counts[q]);
    }
    if (n_inc == 0) throw EvaluationError("evaluation undefined: no query occurs in any item");
    return make_point(threshold, miss_sum / n_inc, fa_sum / n_inc, cfg.beta());
}

namespace {

// Best clamped TWV of one query over its own thresholds.
double query_optimal_twv(std::span<const double> row, const GoldLabelSet& gold, std::size_t q,
                         const QueryCounts& counts, double beta) {
    std::vector<std::size_t> order(row.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    double best = 0.0;  // detecting nothing
    std::size_t hit = 0, fa = 0, k = 0;
    while (k < order.size()) {
        const double threshold = row[order[k]];
        for (; k < order.size() && row[order[k]] == threshold; ++k) (gold.label_at(q, order[k]) ? hit : fa)++;
        best = std::max(best, 1.0 - miss_rate(hit, counts) - beta * fa_rate(fa, counts));
    }
    return best;
}

}  // namespace

MtwvResult mtwv(std::span<const TwvPoint> curve, std::span<const DetectionScore> scores, const GoldLabelSet& gold,
                const EvalConfig& cfg) {
    if (curve.empty()) throw PreconditionError("mtwv needs a nonempty TWV curve");
    MtwvResult out;
    out.curve.assign(curve.begin(), curve.end());
    out.per_query_mode = cfg.per_query;

    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : curve) best = std::max(best, p.twv);
    out.mtwv = std::max(0.0, best);
    if (best >= 0.0) {
        double smallest = std::numeric_limits<double>::infinity();
        for (const auto& p : curve)
            if (p.twv == best) smallest = std::min(smallest, p.threshold);
        out.optimal_threshold = smallest;
    }

    const auto grid = align_scores(scores, gold);
    const auto counts = query_counts(gold);
    const std::size_t n_items = gold.item_ids().size();
    const double beta = cfg.beta();
    for (std::size_t q = 0; q < counts.size(); ++q) {
        const auto& id = gold.query_ids()[q];
        if (counts[q].n_true == 0) {
            out.excluded_queries.push_back(id);
            continue;
        }
        const std::span<const double> row(grid.data() + q * n_items, n_items);
        double value = 0.0;
        if (cfg.per_query == PerQueryThreshold::kQueryOptimal) {
            value = query_optimal_twv(row, gold, q, counts[q], beta);
        } else if (out.optimal_threshold) {
            std::size_t hit = 0, fa = 0;
            for (std::size_t i = 0; i < n_items; ++i)
                if (row[i] >= *out.optimal_threshold) (gold.label_at(q, i) ? hit : fa)++;
            value = std::max(0.0, 1.0 - miss_rate(hit, counts[q]) - beta * fa_rate(fa, counts[q]));
        }
        out.per_query_mtwv[id] = value;
    }
    std::sort(out.excluded_queries.begin(), out.excluded_queries.end());
    return out;
}

MtwvResult evaluate(std::span<const DetectionScore> scores, const GoldLabelSet& gold, const EvalConfig& cfg) {
    const auto curve = twv_curve(scores, gold, cfg);
    return mtwv(curve, scores, gold, cfg);
}

}  // namespace qbe::eval
