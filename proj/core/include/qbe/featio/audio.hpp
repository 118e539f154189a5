#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace qbe::featio {

/// Mono PCM audio, samples normalized to [-1, 1) by dividing by 32768.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate_hz = 0;
    int channels = 1;

    double duration_seconds() const {
        return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

/// Reads a RIFF/WAVE file holding 16-bit mono PCM (format code 1).
/// Throws UnsupportedFormatError naming the offending property, or
/// CorruptFileError for truncated / inconsistent containers.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 16-bit mono PCM. Samples are scaled by 32768, rounded and clipped.
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

/// Same as write_wav but takes raw integer samples (exact round-trip).
void write_wav_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                     int sample_rate_hz);

/// Number of taps of the anti-alias filter used by decimate_2x.
inline constexpr int kDecimatorTaps = 63;

/// Windowed-sinc (Hamming) low-pass taps, cutoff 0.45 x input Nyquist,
/// normalized to unit DC gain.
std::vector<double> decimator_taps();

/// Halves the sample rate: anti-alias FIR then keep every second sample.
/// Output has ceil(N/2) samples. Edges are zero-padded.
AudioBuffer decimate_2x(const AudioBuffer& audio);

}  // namespace qbe::featio
