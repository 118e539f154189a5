#include "qbe/search/dtw_search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include <fmt/core.h>

#include "qbe/error.hpp"
#include "qbe/text.hpp"

namespace qbe::search {

void SearchConfig::validate() const {
    if (window_stride_frames < 1)
        throw ConfigError(fmt::format("window_stride_frames must be >= 1, got {}", window_stride_frames));
    if (!(window_scale > 0.0) || !std::isfinite(window_scale))
        throw ConfigError(fmt::format("window_scale must be > 0, got {}", window_scale));
    if (!(variance_floor > 0.0)) throw ConfigError(fmt::format("variance_floor must be > 0, got {}", variance_floor));
}

std::vector<double> pooled_variances(const FeatureMatrix& q, const FeatureMatrix& t, double floor) {
    if (q.num_dims() != t.num_dims())
        throw ShapeError(fmt::format("dimension mismatch: query '{}' has {} dims, item '{}' has {}", q.source_id,
                                     q.num_dims(), t.source_id, t.num_dims()));
    const std::size_t dims = q.num_dims();
    // Welford update over the concatenation of both matrices.
    std::vector<double> mean(dims, 0.0), m2(dims, 0.0);
    double n = 0.0;
    for (const FeatureMatrix* m : {&q, &t}) {
        for (std::size_t r = 0; r < m->num_frames(); ++r) {
            n += 1.0;
            const auto row = m->data.row(r);
            for (std::size_t d = 0; d < dims; ++d) {
                const double x = row[d];
                const double delta = x - mean[d];
                mean[d] += delta / n;
                m2[d] += delta * (x - mean[d]);
            }
        }
    }
    std::vector<double> var(dims, floor);
    if (n > 0)
        for (std::size_t d = 0; d < dims; ++d) var[d] = std::max(m2[d] / n, floor);
    return var;
}

DistanceMatrix distance_matrix(const FeatureMatrix& q, const FeatureMatrix& t, std::span<const double> variances) {
    const std::size_t dims = q.num_dims();
    if (t.num_dims() != dims || variances.size() != dims)
        throw ShapeError(fmt::format("dimension mismatch: query {} dims, item {} dims, {} variances", dims,
                                     t.num_dims(), variances.size()));
    std::vector<double> inv_sd(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        if (!(variances[d] > 0.0))
            throw PreconditionError(fmt::format("variance of dim {} is not positive ({})", d, variances[d]));
        inv_sd[d] = 1.0 / std::sqrt(variances[d]);
    }
    const auto scaled = [&](const FeatureMatrix& m) {
        Matrix out(m.num_frames(), dims);
        for (std::size_t r = 0; r < m.num_frames(); ++r)
            for (std::size_t d = 0; d < dims; ++d) out(r, d) = m.data(r, d) * inv_sd[d];
        return out;
    };
    const Matrix qs = scaled(q);
    const Matrix ts = scaled(t);

    DistanceMatrix out{Matrix(q.num_frames(), t.num_frames()), false};
    for (std::size_t i = 0; i < qs.rows(); ++i) {
        const auto qi = qs.row(i);
        auto dst = out.values.row(i);
        for (std::size_t j = 0; j < ts.rows(); ++j) {
            const auto tj = ts.row(j);
            double acc = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                const double diff = qi[d] - tj[d];
                acc += diff * diff;
            }
            dst[j] = std::sqrt(acc);
        }
    }
    return out;
}

DistanceMatrix range_normalize(DistanceMatrix d) {
    auto values = d.values.values();
    if (!values.empty()) {
        const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
        const double lo = *lo_it;
        const double range = *hi_it - lo;
        if (range > 0.0) {
            for (auto& v : values) v = std::clamp((v - lo) / range, 0.0, 1.0);
        } else {
            std::fill(values.begin(), values.end(), 0.0);
        }
    }
    d.normalized = true;
    return d;
}

void DtwWorkspace::reserve(std::size_t width) {
    for (int k = 0; k < 2; ++k) {
        value_[k].resize(width);
        sum_[k].resize(width);
        len_[k].resize(width);
    }
}

double dtw_window_cost(const Matrix& distances, std::size_t first_col, std::size_t width, DtwWorkspace& ws) {
    const std::size_t rows = distances.rows();
    if (rows == 0 || width == 0 || first_col + width > distances.cols())
        throw PreconditionError(fmt::format("window [{}, {}) does not fit a {}x{} distance matrix", first_col,
                                            first_col + width, rows, distances.cols()));
    ws.reserve(width);
    const auto cell_row = [&](std::size_t i) { return distances.row(i).subspan(first_col, width); };

    // Greedy seed: each cell keeps the predecessor that gives the lowest
    // running mean. The result is the mean cost of a real path, so it is an
    // upper bound on the optimum.
    double lambda = 0.0;
    {
        double* sum_prev = ws.sum_[0].data();
        double* len_prev = ws.len_[0].data();
        double* sum_cur = ws.sum_[1].data();
        double* len_cur = ws.len_[1].data();
        auto c = cell_row(0);
        sum_prev[0] = c[0];
        len_prev[0] = 1.0;
        for (std::size_t j = 1; j < width; ++j) {
            sum_prev[j] = sum_prev[j - 1] + c[j];
            len_prev[j] = len_prev[j - 1] + 1.0;
        }
        for (std::size_t i = 1; i < rows; ++i) {
            c = cell_row(i);
            sum_cur[0] = sum_prev[0] + c[0];
            len_cur[0] = len_prev[0] + 1.0;
            for (std::size_t j = 1; j < width; ++j) {
                double best_sum = sum_prev[j - 1];
                double best_len = len_prev[j - 1];
                double best = (best_sum + c[j]) / (best_len + 1.0);
                const double up = (sum_prev[j] + c[j]) / (len_prev[j] + 1.0);
                if (up < best) {
                    best = up;
                    best_sum = sum_prev[j];
                    best_len = len_prev[j];
                }
                const double left = (sum_cur[j - 1] + c[j]) / (len_cur[j - 1] + 1.0);
                if (left < best) {
                    best_sum = sum_cur[j - 1];
                    best_len = len_cur[j - 1];
                }
                sum_cur[j] = best_sum + c[j];
                len_cur[j] = best_len + 1.0;
            }
            std::swap(sum_prev, sum_cur);
            std::swap(len_prev, len_cur);
        }
        lambda = sum_prev[width - 1] / len_prev[width - 1];
    }

    // Dinkelbach refinement.
    for (int iter = 0; iter < 64; ++iter) {
        double* v_prev = ws.value_[0].data();
        double* s_prev = ws.sum_[0].data();
        double* l_prev = ws.len_[0].data();
        double* v_cur = ws.value_[1].data();
        double* s_cur = ws.sum_[1].data();
        double* l_cur = ws.len_[1].data();

        auto c = cell_row(0);
        v_prev[0] = c[0] - lambda;
        s_prev[0] = c[0];
        l_prev[0] = 1.0;
        for (std::size_t j = 1; j < width; ++j) {
            v_prev[j] = v_prev[j - 1] + (c[j] - lambda);
            s_prev[j] = s_prev[j - 1] + c[j];
            l_prev[j] = l_prev[j - 1] + 1.0;
        }
        for (std::size_t i = 1; i < rows; ++i) {
            c = cell_row(i);
            v_cur[0] = v_prev[0] + (c[0] - lambda);
            s_cur[0] = s_prev[0] + c[0];
            l_cur[0] = l_prev[0] + 1.0;
            for (std::size_t j = 1; j < width; ++j) {
                double best = v_prev[j - 1];
                std::size_t src = 0;
                if (v_prev[j] < best) {
                    best = v_prev[j];
                    src = 1;
                }
                if (v_cur[j - 1] < best) {
                    best = v_cur[j - 1];
                    src = 2;
                }
                const double cost = c[j];
                v_cur[j] = best + (cost - lambda);
                switch (src) {
                    case 0:
                        s_cur[j] = s_prev[j - 1] + cost;
                        l_cur[j] = l_prev[j - 1] + 1.0;
                        break;
                    case 1:
                        s_cur[j] = s_prev[j] + cost;
                        l_cur[j] = l_prev[j] + 1.0;
                        break;
                    default:
                        s_cur[j] = s_cur[j - 1] + cost;
                        l_cur[j] = l_cur[j - 1] + 1.0;
                        break;
                }
            }
            std::swap(v_prev, v_cur);
            std::swap(s_prev, s_cur);
            std::swap(l_prev, l_cur);
        }
        const double ratio = s_prev[width - 1] / l_prev[width - 1];
        if (!(ratio < lambda)) break;
        lambda = ratio;
    }
    return lambda;
}

bool dtw_window_beats(const Matrix& distances, std::size_t first_col, std::size_t width, double bound,
                      DtwWorkspace& ws) {
    const std::size_t rows = distances.rows();
    if (rows == 0 || width == 0 || first_col + width > distances.cols())
        throw PreconditionError(fmt::format("window [{}, {}) does not fit a {}x{} distance matrix", first_col,
                                            first_col + width, rows, distances.cols()));
    ws.reserve(width);
    double* prev = ws.value_[0].data();
    double* cur = ws.value_[1].data();
    const double* c = distances.row(0).data() + first_col;
    prev[0] = c[0] - bound;
    for (std::size_t j = 1; j < width; ++j) prev[j] = prev[j - 1] + (c[j] - bound);
    for (std::size_t i = 1; i < rows; ++i) {
        c = distances.row(i).data() + first_col;
        // Vertical and diagonal predecessors first (no loop-carried
        // dependency), then the horizontal scan.
        cur[0] = prev[0] + (c[0] - bound);
        for (std::size_t j = 1; j < width; ++j) cur[j] = std::min(prev[j - 1], prev[j]) + (c[j] - bound);
        for (std::size_t j = 1; j < width; ++j) cur[j] = std::min(cur[j], cur[j - 1] + (c[j] - bound));
        std::swap(prev, cur);
    }
    return prev[width - 1] < 0.0;
}

double dtw_window_cost(const Matrix& window) {
    DtwWorkspace ws;
    return dtw_window_cost(window, 0, window.cols(), ws);
}

std::size_t window_length(std::size_t query_frames, std::size_t item_frames, double window_scale) {
    const auto scaled = static_cast<std::size_t>(std::llround(window_scale * static_cast<double>(query_frames)));
    return std::min(std::max<std::size_t>(scaled, 1), item_frames);
}

std::vector<std::size_t> window_starts(std::size_t item_frames, std::size_t window_len, int stride) {
    if (stride < 1) throw PreconditionError(fmt::format("window stride must be >= 1, got {}", stride));
    if (window_len == 0 || window_len > item_frames)
        throw PreconditionError(fmt::format("window length {} invalid for {} item frames", window_len, item_frames));
    const std::size_t last = item_frames - window_len;
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s <= last; s += static_cast<std::size_t>(stride)) starts.push_back(s);
    if (starts.back() != last) starts.push_back(last);
    return starts;
}

namespace {

DetectionScore score_pair(const FeatureMatrix& q, const FeatureMatrix& t, const SearchConfig& cfg,
                          DtwWorkspace& ws, std::uint64_t& windows) {
    const auto variances = pooled_variances(q, t, cfg.variance_floor);
    const DistanceMatrix d = range_normalize(distance_matrix(q, t, variances));

    // |Q| > |T| falls out of window_length clamping to |T|: one window, whole item.
    const std::size_t len = window_length(q.num_frames(), t.num_frames(), cfg.window_scale);
    double best_cost = std::numeric_limits<double>::infinity();
    std::size_t best_start = 0;
    for (const std::size_t start : window_starts(t.num_frames(), len, cfg.window_stride_frames)) {
        ++windows;
        // Ties keep the earlier window, so only a strictly better one needs the exact cost.
        if (start != 0 && !dtw_window_beats(d.values, start, len, best_cost, ws)) continue;
        const double cost = dtw_window_cost(d.values, start, len, ws);
        if (cost < best_cost) {
            best_cost = cost;
            best_start = start;
        }
    }
    DetectionScore out;
    out.query_id = q.source_id;
    out.item_id = t.source_id;
    out.score = std::clamp(1.0 - best_cost, 0.0, 1.0);
    out.best_window_start_frame = best_start;
    out.best_window_end_frame = best_start + len - 1;
    return out;
}

}  // namespace

DetectionScore detection_score(const FeatureMatrix& q, const FeatureMatrix& t, const SearchConfig& cfg) {
    cfg.validate();
    q.validate();
    t.validate();
    DtwWorkspace ws;
    std::uint64_t windows = 0;
    return score_pair(q, t, cfg, ws, windows);
}

double ScanStats::windows_per_minute_per_core() const {
    if (wall_seconds <= 0.0) return 0.0;
    return static_cast<double>(windows) * 60.0 / (wall_seconds * std::max(1u, workers));
}

ScanResult search_corpus(std::span<const Utterance> queries, std::span<const Utterance> items,
                         const SearchConfig& cfg, const ScanOptions& options) {
    cfg.validate();
    for (const auto& q : queries) q.features.validate();
    for (const auto& t : items) t.features.validate();
    for (const auto& q : queries)
        for (const auto& t : items)
            if (q.features.num_dims() != t.features.num_dims())
                throw ShapeError(fmt::format("dimension mismatch for pair ({}, {}): {} vs {} dims", q.id, t.id,
                                             q.features.num_dims(), t.features.num_dims()));

    const auto started = std::chrono::steady_clock::now();
    const std::size_t n_items = items.size();
    const std::size_t total = queries.size() * n_items;

    ScanResult result;
    result.scores.resize(total);
    std::vector<std::atomic<std::size_t>> per_query_done(queries.size());
    std::atomic<std::size_t> next{0};
    std::atomic<std::uint64_t> windows{0};
    std::atomic<std::size_t> queries_done{0};
    std::mutex progress_mutex;

    const auto worker = [&] {
        DtwWorkspace ws;
        std::uint64_t local_windows = 0;
        for (std::size_t k = next.fetch_add(1); k < total; k = next.fetch_add(1)) {
            const std::size_t qi = k / n_items;
            const std::size_t ti = k % n_items;
            DetectionScore s = score_pair(queries[qi].features, items[ti].features, cfg, ws, local_windows);
            s.query_id = queries[qi].id;
            s.item_id = items[ti].id;
            result.scores[k] = std::move(s);
            if (per_query_done[qi].fetch_add(1) + 1 == n_items && options.on_query_done) {
                std::lock_guard lock(progress_mutex);
                options.on_query_done(queries[qi].id, ++queries_done, queries.size());
            }
        }
        windows += local_windows;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(std::max<std::size_t>(total, 1))));
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
        worker();
    }

    std::sort(result.scores.begin(), result.scores.end(), [](const DetectionScore& a, const DetectionScore& b) {
        return std::tie(a.query_id, a.item_id) < std::tie(b.query_id, b.item_id);
    });
    result.stats.pairs = total;
    result.stats.windows = windows.load();
    result.stats.workers = workers;
    result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

void write_scores_tsv(std::ostream& out, std::span<const DetectionScore> scores) {
    out << "query\titem\tscore\tstart_frame\tend_frame\n";
    for (const auto& s : scores)
        out << fmt::format("{}\t{}\t{:.6f}\t{}\t{}\n", s.query_id, s.item_id, s.score, s.best_window_start_frame,
                           s.best_window_end_frame);
}

void write_scores_tsv(const std::filesystem::path& path, std::span<const DetectionScore> scores) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    write_scores_tsv(out, scores);
    if (!out) throw Error(fmt::format("write failed: {}", path.string()));
}

std::vector<DetectionScore> read_scores_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(fmt::format("cannot open scores file {}", path.string()));
    std::vector<DetectionScore> scores;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        const auto f = text::split(line, '\t');
        if (line_no == 1) {
            if (f.size() != 5 || f[0] != "query" || f[1] != "item" || f[2] != "score")
                throw CorruptFileError(fmt::format("{}: bad scores header", path.string()));
            continue;
        }
        if (f.size() != 5)
            throw CorruptFileError(fmt::format("{}:{}: expected 5 fields, found {}", path.string(), line_no, f.size()));
        try {
            DetectionScore s;
            s.query_id = f[0];
            s.item_id = f[1];
            s.score = std::stod(f[2]);
            s.best_window_start_frame = std::stoull(f[3]);
            s.best_window_end_frame = std::stoull(f[4]);
            scores.push_back(std::move(s));
        } catch (const std::logic_error&) {
            throw CorruptFileError(fmt::format("{}:{}: unparsable numeric field", path.string(), line_no));
        }
    }
    if (line_no == 0) throw CorruptFileError(fmt::format("{}: empty scores file", path.string()));
    return scores;
}

}  // namespace qbe::search
