#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "qbe/error.hpp"
#include "qbe/featio/feature_matrix.hpp"
#include "qbe/matrix.hpp"

namespace qbe::analysis {

struct SegmentInterval {
    std::string label;
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::string source;  // manifest id of the feature file; may be empty
};

struct SegmentToken {
    std::string label;
    std::vector<double> feature_vector;
    std::string source_id;
};

struct TokensResult {
    std::vector<SegmentToken> tokens;
    Diagnostics diagnostics;
};

/// Mean of the frames whose start time lies in [start_ms, end_ms).
/// Intervals covering no frame are skipped with a warning.
TokensResult average_segment_features(const featio::FeatureMatrix& features,
                                      const std::vector<SegmentInterval>& intervals);

/// Pairwise Euclidean distances between token vectors.
Matrix class_distance_matrix(const std::vector<SegmentToken>& tokens);

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k pairs with values[k]
    int sweeps = 0;
};

/// Cyclic Jacobi rotations for a symmetric matrix. Stops once every
/// off-diagonal entry is below `tolerance` (relative to max(1, ||A||_F)).
EigenDecomposition jacobi_eigen(const Matrix& symmetric, double tolerance = 1e-12, int max_sweeps = 100);

struct MdsEmbedding {
    Matrix points;                     // n x k, columns centered
    std::vector<double> eigenvalues;   // all n, descending
    std::size_t negative_eigenvalues = 0;  // clamped to zero for scaling
    double stress = 0.0;
};

/// Torgerson scaling: B = -1/2 J D^2 J, top-k eigenpairs, coordinates
/// v_k * sqrt(max(lambda_k, 0)); each column's largest-magnitude entry is
/// made positive. Stress is Kruskal stress-1 against the input distances.
MdsEmbedding classical_mds(const Matrix& distances, std::size_t k = 2);

/// Stress-1 of an embedding: sqrt(sum (delta - t)^2 / sum t^2) over i < j,
/// where t are the target distances and delta the embedded ones; 0 when all
/// target distances are 0.
double kruskal_stress(const Matrix& target, const Matrix& embedded_points);

/// chi-square(2 df) 95% quantile: the 2-df chi-square CDF is 1 - exp(-x/2),
/// so the quantile is -2 ln(0.05) = 5.991464...
inline constexpr double kChiSquare2Df95 = 5.991464547107979;

struct EllipseParams {
    std::string label;
    std::array<double, 2> center{};
    std::array<double, 2> semi_axes{};  // major, minor
    double rotation_radians = 0.0;      // angle of the major axis, in [0, pi)
    bool degenerate = false;
};

struct EllipseResult {
    EllipseParams ellipse;
    Diagnostics diagnostics;
};

/// 95% data ellipse of a 2-D point cloud (sample covariance). Needs >= 3
/// points; singular covariance yields a degenerate ellipse with a zero minor axis.
EllipseResult ellipse_95(const std::vector<std::array<double, 2>>& points, std::string label = {});

struct MdsOutputs {
    std::filesystem::path coordinates_csv;
    std::filesystem::path ellipses_csv;
    std::filesystem::path svg;
    std::filesystem::path metadata_json;
};

/// Writes `<prefix>_coords.csv` (label,x,y), `<prefix>_ellipses.csv`
/// (label,cx,cy,a,b,theta), `<prefix>.svg` and `<prefix>_meta.json`.
MdsOutputs emit_mds_outputs(const MdsEmbedding& embedding, const std::vector<std::string>& labels,
                            const std::vector<EllipseParams>& ellipses, const std::filesystem::path& prefix);

/// Intervals TSV: header `label<TAB>start_ms<TAB>end_ms`, optionally with a
/// fourth `source` column naming the feature file's manifest id.
std::vector<SegmentInterval> read_intervals_tsv(const std::filesystem::path& path);

}  // namespace qbe::analysis
