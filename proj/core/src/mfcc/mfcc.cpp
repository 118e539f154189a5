#include "qbe/mfcc/mfcc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "qbe/error.hpp"

namespace qbe::mfcc {

using featio::AudioBuffer;
using featio::FeatureMatrix;

std::size_t MfccConfig::frame_length_samples() const {
    return static_cast<std::size_t>(std::lround(frame_length_ms * sample_rate_hz / 1000.0));
}

std::size_t MfccConfig::frame_shift_samples() const {
    return static_cast<std::size_t>(std::lround(frame_shift_ms * sample_rate_hz / 1000.0));
}

std::size_t MfccConfig::fft_size() const { return std::bit_ceil(std::max<std::size_t>(frame_length_samples(), 1)); }

void MfccConfig::validate() const {
    const double high = resolved_high_freq_hz();
    if (sample_rate_hz <= 0) throw ConfigError(fmt::format("sample rate must be positive, got {}", sample_rate_hz));
    if (!(low_freq_hz > 0.0 && low_freq_hz < high && high <= sample_rate_hz / 2.0))
        throw ConfigError(fmt::format("need 0 < low_freq ({}) < high_freq ({}) <= Nyquist ({})", low_freq_hz, high,
                                      sample_rate_hz / 2.0));
    if (num_mel_filters < 1 || num_cepstra < 1 || num_cepstra > num_mel_filters)
        throw ConfigError(fmt::format("need 1 <= num_cepstra ({}) <= num_mel_filters ({})", num_cepstra,
                                      num_mel_filters));
    if (!(pre_emphasis >= 0.0 && pre_emphasis < 1.0))
        throw ConfigError(fmt::format("pre_emphasis must lie in [0, 1), got {}", pre_emphasis));
    if (frame_length_samples() < 1 || frame_shift_samples() < 1)
        throw ConfigError("frame length and shift must each cover at least one sample");
    if (delta_window < 1) throw ConfigError(fmt::format("delta_window must be >= 1, got {}", delta_window));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t num_frames(std::size_t num_samples, std::size_t frame_length, std::size_t frame_shift) {
    if (num_samples < frame_length) return 0;
    return 1 + (num_samples - frame_length) / frame_shift;
}

Matrix frame_signal(const AudioBuffer& audio, const MfccConfig& cfg) {
    cfg.validate();
    const std::size_t len = cfg.frame_length_samples();
    const std::size_t shift = cfg.frame_shift_samples();
    const std::size_t frames = num_frames(audio.samples.size(), len, shift);
    if (frames == 0)
        throw PreconditionError(fmt::format("audio too short: {} samples, one frame needs {}",
                                            audio.samples.size(), len));

    std::vector<double> window(len);
    for (std::size_t n = 0; n < len; ++n)
        window[n] = len == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (len - 1));

    Matrix out(frames, len);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* x = audio.samples.data() + f * shift;
        auto row = out.row(f);
        // First sample of a frame uses itself as the predecessor.
        for (std::size_t n = 0; n < len; ++n) {
            const double prev = n > 0 ? x[n - 1] : x[0];
            row[n] = (x[n] - cfg.pre_emphasis * prev) * window[n];
        }
    }
    return out;
}

void fft(std::span<std::complex<double>> a) {
    const std::size_t n = a.size();
    if (n == 0 || !std::has_single_bit(n)) throw PreconditionError(fmt::format("fft size {} is not a power of two", n));
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> w = std::polar(1.0, angle * static_cast<double>(k));
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
            }
        }
    }
}

std::vector<double> mel_center_frequencies(const MfccConfig& cfg) {
    const double lo = hz_to_mel(cfg.low_freq_hz);
    const double hi = hz_to_mel(cfg.resolved_high_freq_hz());
    const double step = (hi - lo) / (cfg.num_mel_filters + 1);
    std::vector<double> centers(cfg.num_mel_filters);
    for (int m = 0; m < cfg.num_mel_filters; ++m) centers[m] = mel_to_hz(lo + (m + 1) * step);
    return centers;
}

Matrix mel_filterbank(const MfccConfig& cfg) {
    cfg.validate();
    const std::size_t nfft = cfg.fft_size();
    const std::size_t bins = nfft / 2 + 1;
    const double lo = hz_to_mel(cfg.low_freq_hz);
    const double hi = hz_to_mel(cfg.resolved_high_freq_hz());
    const double step = (hi - lo) / (cfg.num_mel_filters + 1);

    Matrix bank(static_cast<std::size_t>(cfg.num_mel_filters), bins);
    for (int m = 0; m < cfg.num_mel_filters; ++m) {
        const double left = lo + m * step;
        const double center = left + step;
        const double right = center + step;
        for (std::size_t k = 0; k < bins; ++k) {
            const double mel = hz_to_mel(static_cast<double>(k) * cfg.sample_rate_hz / static_cast<double>(nfft));
            double w = 0.0;
            if (mel > left && mel <= center)
                w = (mel - left) / (center - left);
            else if (mel > center && mel < right)
                w = (right - mel) / (right - center);
            bank(static_cast<std::size_t>(m), k) = w;
        }
    }
    return bank;
}

Matrix dct_matrix(std::size_t rows, std::size_t size) {
    Matrix d(rows, size);
    for (std::size_t k = 0; k < rows; ++k) {
        const double scale = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(size));
        for (std::size_t n = 0; n < size; ++n)
            d(k, n) = scale * std::cos(std::numbers::pi * static_cast<double>(k) * (n + 0.5) / static_cast<double>(size));
    }
    return d;
}

Matrix filterbank_energies(const AudioBuffer& audio, const MfccConfig& cfg) {
    if (audio.sample_rate_hz != cfg.sample_rate_hz)
        throw ConfigError(fmt::format("audio is {} Hz but the MFCC config expects {} Hz", audio.sample_rate_hz,
                                      cfg.sample_rate_hz));
    const Matrix frames = frame_signal(audio, cfg);
    const Matrix bank = mel_filterbank(cfg);
    const std::size_t nfft = cfg.fft_size();
    const std::size_t bins = nfft / 2 + 1;

    Matrix energies(frames.rows(), bank.rows());
    std::vector<std::complex<double>> buf(nfft);
    std::vector<double> power(bins);
    for (std::size_t f = 0; f < frames.rows(); ++f) {
        std::fill(buf.begin(), buf.end(), std::complex<double>{});
        const auto row = frames.row(f);
        std::copy(row.begin(), row.end(), buf.begin());
        fft(buf);
        for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
        for (std::size_t m = 0; m < bank.rows(); ++m) {
            double e = 0.0;
            const auto w = bank.row(m);
            for (std::size_t k = 0; k < bins; ++k) e += w[k] * power[k];
            energies(f, m) = e;
        }
    }
    return energies;
}

FeatureMatrix extract_mfcc(const AudioBuffer& audio, const MfccConfig& cfg) {
    const Matrix energies = filterbank_energies(audio, cfg);
    const Matrix dct = dct_matrix(static_cast<std::size_t>(cfg.num_cepstra), energies.cols());

    FeatureMatrix out;
    out.data = DenseMatrix<float>(energies.rows(), dct.rows());
    out.frame_shift_ms = static_cast<float>(cfg.frame_shift_ms);
    out.frame_length_ms = static_cast<float>(cfg.frame_length_ms);
    out.extractor_tag = fmt::format("mfcc{}", cfg.num_cepstra);

    std::vector<double> log_e(energies.cols());
    for (std::size_t f = 0; f < energies.rows(); ++f) {
        for (std::size_t m = 0; m < energies.cols(); ++m)
            log_e[m] = std::log(std::max(energies(f, m), kLogEnergyFloor));
        for (std::size_t c = 0; c < dct.rows(); ++c) {
            double acc = 0.0;
            const auto basis = dct.row(c);
            for (std::size_t m = 0; m < log_e.size(); ++m) acc += basis[m] * log_e[m];
            out.data(f, c) = static_cast<float>(acc);
        }
    }
    return out;
}

namespace {

// Regression deltas with edge replication, computed in double.
Matrix deltas(const Matrix& x, int window) {
    const auto frames = static_cast<std::ptrdiff_t>(x.rows());
    double denom = 0.0;
    for (int k = 1; k <= window; ++k) denom += static_cast<double>(k) * k;
    denom *= 2.0;

    Matrix out(x.rows(), x.cols());
    for (std::ptrdiff_t t = 0; t < frames; ++t) {
        for (int k = 1; k <= window; ++k) {
            const auto fwd = static_cast<std::size_t>(std::min<std::ptrdiff_t>(t + k, frames - 1));
            const auto bwd = static_cast<std::size_t>(std::max<std::ptrdiff_t>(t - k, 0));
            for (std::size_t d = 0; d < x.cols(); ++d)
                out(static_cast<std::size_t>(t), d) += k * (x(fwd, d) - x(bwd, d));
        }
        for (std::size_t d = 0; d < x.cols(); ++d) out(static_cast<std::size_t>(t), d) /= denom;
    }
    return out;
}

}  // namespace

FeatureMatrix append_deltas(const FeatureMatrix& m, int window) {
    if (m.num_frames() == 0) throw PreconditionError("append_deltas needs at least one frame");
    if (window < 1) throw PreconditionError(fmt::format("delta window must be >= 1, got {}", window));
    Matrix statics(m.num_frames(), m.num_dims());
    for (std::size_t t = 0; t < m.num_frames(); ++t)
        for (std::size_t d = 0; d < m.num_dims(); ++d) statics(t, d) = m.data(t, d);
    const Matrix d1 = deltas(statics, window);
    const Matrix d2 = deltas(d1, window);

    FeatureMatrix out;
    out.frame_shift_ms = m.frame_shift_ms;
    out.frame_length_ms = m.frame_length_ms;
    out.source_id = m.source_id;
    out.extractor_tag = m.extractor_tag.empty() ? std::string{} : fmt::format("{}+dd", m.extractor_tag);
    const std::size_t dims = m.num_dims();
    out.data = DenseMatrix<float>(m.num_frames(), 3 * dims);
    for (std::size_t t = 0; t < m.num_frames(); ++t) {
        for (std::size_t d = 0; d < dims; ++d) {
            out.data(t, d) = m.data(t, d);
            out.data(t, dims + d) = static_cast<float>(d1(t, d));
            out.data(t, 2 * dims + d) = static_cast<float>(d2(t, d));
        }
    }
    return out;
}

FeatureMatrix extract_mfcc_with_deltas(const AudioBuffer& audio, const MfccConfig& cfg) {
    auto out = append_deltas(extract_mfcc(audio, cfg), cfg.delta_window);
    out.extractor_tag = fmt::format("mfcc{}", 3 * cfg.num_cepstra);
    return out;
}

}  // namespace qbe::mfcc
