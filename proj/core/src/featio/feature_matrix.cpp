#include "qbe/featio/feature_matrix.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include <fmt/core.h>

#include "byte_io.hpp"
#include "qbe/error.hpp"

namespace qbe::featio {

using namespace detail;

void FeatureMatrix::validate() const {
    if (num_frames() == 0 || num_dims() == 0)
        throw PreconditionError(
            fmt::format("feature matrix '{}' is empty ({}x{})", source_id, num_frames(), num_dims()));
    if (!(frame_shift_ms > 0.0f) || !(frame_length_ms > 0.0f) || !std::isfinite(frame_shift_ms) ||
        !std::isfinite(frame_length_ms))
        throw PreconditionError(fmt::format("feature matrix '{}' has non-positive frame timing", source_id));
    const auto values = data.values();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!std::isfinite(values[i]))
            throw PreconditionError(fmt::format("feature matrix '{}' has a non-finite value at frame {}, dim {}",
                                                source_id, i / num_dims(), i % num_dims()));
}

void write_feature_stream(const FeatureMatrix& matrix, std::ostream& out) {
    matrix.validate();
    std::array<unsigned char, kFeatureHeaderBytes> header{};
    std::memcpy(header.data(), kFeatureMagic, 4);
    store_u16(header.data() + 4, kFeatureFormatVersion);
    store_u32(header.data() + 8, static_cast<std::uint32_t>(matrix.num_frames()));
    store_u32(header.data() + 12, static_cast<std::uint32_t>(matrix.num_dims()));
    store_f32(header.data() + 16, matrix.frame_shift_ms);
    store_f32(header.data() + 20, matrix.frame_length_ms);
    out.write(reinterpret_cast<const char*>(header.data()), header.size());

    const auto values = matrix.data.values();
    std::vector<unsigned char> payload(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) store_f32(payload.data() + 4 * i, values[i]);
    out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!out) throw Error("feature file write failed");
}

void write_feature_file(const FeatureMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path.string()));
    write_feature_stream(matrix, out);
}

FeatureMatrix read_feature_stream(std::istream& in, const std::string& what) {
    const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (bytes.size() < kFeatureHeaderBytes)
        throw CorruptFileError(fmt::format("{}: expected at least {} header bytes, found {}", what,
                                           kFeatureHeaderBytes, bytes.size()));
    const unsigned char* h = bytes.data();
    if (std::memcmp(h, kFeatureMagic, 4) != 0)
        throw CorruptFileError(fmt::format("{}: bad magic (expected QFEA)", what));
    const std::uint16_t version = load_u16(h + 4);
    if (version != kFeatureFormatVersion)
        throw CorruptFileError(fmt::format("{}: format version expected {}, found {}", what,
                                           kFeatureFormatVersion, version));
    const std::uint32_t frames = load_u32(h + 8);
    const std::uint32_t dims = load_u32(h + 12);
    const std::uint64_t expected = kFeatureHeaderBytes + std::uint64_t{frames} * dims * 4;
    if (bytes.size() != expected)
        throw CorruptFileError(fmt::format("{}: header says {} frames x {} dims = {} bytes, file has {}", what,
                                           frames, dims, expected, bytes.size()));

    FeatureMatrix m;
    m.frame_shift_ms = load_f32(h + 16);
    m.frame_length_ms = load_f32(h + 20);
    m.data = DenseMatrix<float>(frames, dims);
    auto values = m.data.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = load_f32(h + kFeatureHeaderBytes + 4 * i);
    m.source_id = what;
    try {
        m.validate();
    } catch (const PreconditionError& e) {
        throw CorruptFileError(fmt::format("{}: {}", what, e.what()));
    }
    return m;
}

FeatureMatrix read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    auto m = read_feature_stream(in, path.string());
    m.source_id = path.stem().string();
    return m;
}

}  // namespace qbe::featio
