#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "qbe/featio/audio.hpp"
#include "qbe/featio/feature_matrix.hpp"
#include "qbe/matrix.hpp"

namespace qbe::mfcc {

struct MfccConfig {
    int sample_rate_hz = 8000;
    double frame_length_ms = 25.0;
    double frame_shift_ms = 10.0;
    int num_mel_filters = 23;
    int num_cepstra = 13;
    double low_freq_hz = 20.0;
    std::optional<double> high_freq_hz;  // default: sample_rate/2 - 100
    double pre_emphasis = 0.97;
    int delta_window = 2;

    double resolved_high_freq_hz() const {
        return high_freq_hz.value_or(sample_rate_hz / 2.0 - 100.0);
    }
    std::size_t frame_length_samples() const;
    std::size_t frame_shift_samples() const;
    std::size_t fft_size() const;

    /// Throws ConfigError when an invariant does not hold.
    void validate() const;
};

/// Floor applied to filterbank energies before the log.
inline constexpr double kLogEnergyFloor = 1e-10;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// 1 + floor((N - L) / S); zero when N < L.
std::size_t num_frames(std::size_t num_samples, std::size_t frame_length, std::size_t frame_shift);

/// Slices, pre-emphasizes and Hamming-windows the signal. One row per frame.
/// Throws PreconditionError when the audio is shorter than one frame.
Matrix frame_signal(const featio::AudioBuffer& audio, const MfccConfig& cfg);

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft(std::span<std::complex<double>> data);

/// Triangular filters on the mel scale: num_mel_filters x (fft_size/2 + 1).
Matrix mel_filterbank(const MfccConfig& cfg);

/// Center frequency (Hz) of each mel filter.
std::vector<double> mel_center_frequencies(const MfccConfig& cfg);

/// Orthonormal DCT-II basis, rows = output coefficients (rows x size).
Matrix dct_matrix(std::size_t rows, std::size_t size);

/// Mel filterbank energies per frame (frames x num_mel_filters), before the log.
Matrix filterbank_energies(const featio::AudioBuffer& audio, const MfccConfig& cfg);

/// Static cepstra (num_cepstra dims).
featio::FeatureMatrix extract_mfcc(const featio::AudioBuffer& audio, const MfccConfig& cfg);

/// Appends regression deltas and delta-deltas: output has 3x the dims.
featio::FeatureMatrix append_deltas(const featio::FeatureMatrix& m, int window);

/// extract_mfcc followed by append_deltas, tagged "mfcc39" for the defaults.
featio::FeatureMatrix extract_mfcc_with_deltas(const featio::AudioBuffer& audio, const MfccConfig& cfg);

}  // namespace qbe::mfcc
