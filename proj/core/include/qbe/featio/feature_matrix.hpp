#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "qbe/matrix.hpp"

namespace qbe::featio {

/// Per-frame speech features (frames x dims).
///
/// Values and frame timings are held at the precision of the on-disk
/// format (binary32) so that write/read is an exact round trip.
struct FeatureMatrix {
    DenseMatrix<float> data;
    float frame_shift_ms = 10.0f;
    float frame_length_ms = 25.0f;
    std::string source_id;
    std::string extractor_tag;

    std::size_t num_frames() const noexcept { return data.rows(); }
    std::size_t num_dims() const noexcept { return data.cols(); }

    /// Start time of frame i in milliseconds.
    double frame_start_ms(std::size_t i) const noexcept {
        return static_cast<double>(i) * static_cast<double>(frame_shift_ms);
    }

    /// Throws PreconditionError if empty, non-finite, or timing is not positive.
    void validate() const;
};

/// Header layout of the ".qf" feature file.
inline constexpr char kFeatureMagic[4] = {'Q', 'F', 'E', 'A'};
inline constexpr std::uint16_t kFeatureFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 32;

void write_feature_file(const FeatureMatrix& matrix, const std::filesystem::path& path);
void write_feature_stream(const FeatureMatrix& matrix, std::ostream& out);

/// source_id is set to the file stem; extractor_tag is left empty (it lives
/// in the manifest, not the file).
FeatureMatrix read_feature_file(const std::filesystem::path& path);
FeatureMatrix read_feature_stream(std::istream& in, const std::string& what = "<stream>");

}  // namespace qbe::featio
