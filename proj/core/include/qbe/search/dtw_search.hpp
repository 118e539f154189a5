#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qbe/featio/feature_matrix.hpp"
#include "qbe/matrix.hpp"

namespace qbe::search {

using featio::FeatureMatrix;

/// Frame-to-frame distances of one (query, item) pair: |Q| rows x |T| cols.
struct DistanceMatrix {
    Matrix values;
    bool normalized = false;
};

struct SearchConfig {
    int window_stride_frames = 1;
    double window_scale = 1.0;  // window length = round(scale x |Q|)
    double variance_floor = 1e-8;

    void validate() const;
};

struct DetectionScore {
    std::string query_id;
    std::string item_id;
    double score = 0.0;
    std::size_t best_window_start_frame = 0;
    std::size_t best_window_end_frame = 0;
};

/// Per-dimension population variance over the concatenated frames of q and
/// t, floored at `floor`.
std::vector<double> pooled_variances(const FeatureMatrix& q, const FeatureMatrix& t, double floor);

/// Standardized Euclidean distance between every frame of q and every frame of t.
DistanceMatrix distance_matrix(const FeatureMatrix& q, const FeatureMatrix& t, std::span<const double> variances);

/// Affine rescale of the whole matrix onto [0, 1]. A constant matrix maps to zeros.
DistanceMatrix range_normalize(DistanceMatrix d);

/// Scratch buffers for the window DTW; reuse across calls to avoid allocation.
class DtwWorkspace {
public:
    void reserve(std::size_t width);

private:
    friend double dtw_window_cost(const Matrix&, std::size_t, std::size_t, DtwWorkspace&);
    friend bool dtw_window_beats(const Matrix&, std::size_t, std::size_t, double, DtwWorkspace&);
    std::vector<double> value_[2];
    std::vector<double> sum_[2];
    std::vector<double> len_[2];
};

/// Minimum, over monotone paths from the window's top-left to bottom-right
/// cell using steps (1,1), (1,0) and (0,1), of the mean cell cost along the
/// path. The window is columns [first_col, first_col + width) of `distances`.
///
/// The objective is a ratio, so a plain accumulated-cost recursion is not
/// exact. We seed with the path picked by a greedy ratio recursion and then
/// run Dinkelbach iterations: each pass minimizes sum(cost - lambda) and
/// lowers lambda to the mean cost of the path it finds, stopping once no
/// path beats lambda. Converges in a handful of passes, usually one.
double dtw_window_cost(const Matrix& distances, std::size_t first_col, std::size_t width, DtwWorkspace& ws);

/// True iff some path through the window has mean cost strictly below
/// `bound`, i.e. min over paths of sum(cost - bound) < 0. A single additive
/// pass, several times cheaper than dtw_window_cost; the scan uses it to
/// skip windows that cannot beat the best window found so far.
bool dtw_window_beats(const Matrix& distances, std::size_t first_col, std::size_t width, double bound,
                      DtwWorkspace& ws);

/// Convenience overload over a whole (window-sized) matrix.
double dtw_window_cost(const Matrix& window);

/// Window length used for a pair: min(max(1, round(scale x |Q|)), |T|).
std::size_t window_length(std::size_t query_frames, std::size_t item_frames, double window_scale);

/// Window start frames {0, s, 2s, ...}; the start |T| - L is always included.
std::vector<std::size_t> window_starts(std::size_t item_frames, std::size_t window_len, int stride);

/// Scores one pair: 1 - minimum window cost over the normalized distance matrix.
DetectionScore detection_score(const FeatureMatrix& q, const FeatureMatrix& t, const SearchConfig& cfg);

struct Utterance {
    std::string id;
    FeatureMatrix features;
};

struct ScanStats {
    std::uint64_t pairs = 0;
    std::uint64_t windows = 0;  // dtw_window_cost evaluations
    double wall_seconds = 0.0;
    unsigned workers = 1;

    double windows_per_minute_per_core() const;
};

struct ScanOptions {
    unsigned workers = 1;
    /// Called once per query when all of its items are scored. May be called
    /// from worker threads, but never concurrently.
    std::function<void(const std::string& query_id, std::size_t done, std::size_t total)> on_query_done;
};

struct ScanResult {
    std::vector<DetectionScore> scores;  // sorted by (query_id, item_id)
    ScanStats stats;
};

/// Scores every (query, item) pair. Output is independent of worker count.
/// Throws ShapeError naming the first pair whose dimensions disagree.
ScanResult search_corpus(std::span<const Utterance> queries, std::span<const Utterance> items,
                         const SearchConfig& cfg, const ScanOptions& options = {});

/// Scores TSV: `query<TAB>item<TAB>score<TAB>start_frame<TAB>end_frame`,
/// score with 6 decimals.
void write_scores_tsv(std::ostream& out, std::span<const DetectionScore> scores);
void write_scores_tsv(const std::filesystem::path& path, std::span<const DetectionScore> scores);
std::vector<DetectionScore> read_scores_tsv(const std::filesystem::path& path);

}  // namespace qbe::search
