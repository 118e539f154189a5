#include "qbe/featio/audio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include <fmt/core.h>

#include "byte_io.hpp"
#include "qbe/error.hpp"

namespace qbe::featio {
namespace {

using detail::load_u16;
using detail::load_u32;

constexpr std::uint16_t kPcmFormat = 1;

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const std::string name = path.string();
    if (bytes.size() < 12) throw CorruptFileError(fmt::format("{}: truncated RIFF header", name));
    if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw UnsupportedFormatError(fmt::format("{}: not a RIFF/WAVE container", name));

    bool have_fmt = false;
    int sample_rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_bytes = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = load_u32(chunk + 4);
        const std::size_t body = pos + 8;
        if (size > bytes.size() - body)
            throw CorruptFileError(fmt::format("{}: chunk '{}' claims {} bytes, only {} remain", name,
                                               std::string(reinterpret_cast<const char*>(chunk), 4),
                                               size, bytes.size() - body));
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (size < 16) throw CorruptFileError(fmt::format("{}: fmt chunk too short ({} bytes)", name, size));
            const unsigned char* f = bytes.data() + body;
            const std::uint16_t format = load_u16(f);
            const std::uint16_t channels = load_u16(f + 2);
            const std::uint32_t rate = load_u32(f + 4);
            const std::uint16_t bits = load_u16(f + 14);
            if (format != kPcmFormat)
                throw UnsupportedFormatError(fmt::format("{}: format code {} (only PCM = 1 supported)", name, format));
            if (channels != 1)
                throw UnsupportedFormatError(fmt::format("{}: {} channels (only mono supported)", name, channels));
            if (bits != 16)
                throw UnsupportedFormatError(fmt::format("{}: {} bits per sample (only 16-bit supported)", name, bits));
            if (rate == 0) throw CorruptFileError(fmt::format("{}: sample rate is zero", name));
            sample_rate = static_cast<int>(rate);
            have_fmt = true;
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = bytes.data() + body;
            data_bytes = size;
            break;
        }
        pos = body + size + (size & 1u);  // chunks are word aligned
    }

    if (!have_fmt) throw CorruptFileError(fmt::format("{}: missing fmt chunk before data", name));
    if (data == nullptr) throw CorruptFileError(fmt::format("{}: missing data chunk", name));
    if (data_bytes % 2 != 0)
        throw CorruptFileError(fmt::format("{}: data chunk has odd length {}", name, data_bytes));

    AudioBuffer audio;
    audio.sample_rate_hz = sample_rate;
    audio.samples.resize(data_bytes / 2);
    for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(load_u16(data + 2 * i));
        audio.samples[i] = static_cast<double>(raw) / 32768.0;
    }
    return audio;
}

void write_wav_pcm16(const std::filesystem::path& path, std::span<const std::int16_t> samples,
                     int sample_rate_hz) {
    using detail::store_u16;
    using detail::store_u32;
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::array<unsigned char, 44> header{};
    unsigned char* p = header.data();
    std::memcpy(p, "RIFF", 4);
    store_u32(p + 4, 36 + data_bytes);
    std::memcpy(p + 8, "WAVE", 4);
    std::memcpy(p + 12, "fmt ", 4);
    store_u32(p + 16, 16);
    store_u16(p + 20, kPcmFormat);
    store_u16(p + 22, 1);
    store_u32(p + 24, static_cast<std::uint32_t>(sample_rate_hz));
    store_u32(p + 28, static_cast<std::uint32_t>(sample_rate_hz) * 2);
    store_u16(p + 32, 2);
    store_u16(p + 34, 16);
    std::memcpy(p + 36, "data", 4);
    store_u32(p + 40, data_bytes);
    std::vector<unsigned char> payload(data_bytes);
    for (std::size_t i = 0; i < samples.size(); ++i)
        store_u16(payload.data() + 2 * i, static_cast<std::uint16_t>(samples[i]));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(fmt::format("cannot write {}", path.string()));
    f.write(reinterpret_cast<const char*>(header.data()), header.size());
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (!f) throw Error(fmt::format("write failed: {}", path.string()));
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
    std::vector<std::int16_t> pcm(audio.samples.size());
    std::transform(audio.samples.begin(), audio.samples.end(), pcm.begin(), [](double s) {
        const double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
        return static_cast<std::int16_t>(v);
    });
    write_wav_pcm16(path, pcm, audio.sample_rate_hz);
}

std::vector<double> decimator_taps() {
    // Cutoff 0.45 x input Nyquist, expressed in cycles per input sample.
    constexpr double cutoff = 0.45 * 0.5;
    constexpr int mid = kDecimatorTaps / 2;
    std::vector<double> h(kDecimatorTaps);
    double sum = 0.0;
    for (int n = 0; n < kDecimatorTaps; ++n) {
        const int k = n - mid;
        const double sinc = k == 0 ? 2.0 * cutoff
                                   : std::sin(2.0 * std::numbers::pi * cutoff * k) / (std::numbers::pi * k);
        const double hamming = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (kDecimatorTaps - 1));
        h[n] = sinc * hamming;
        sum += h[n];
    }
    for (auto& v : h) v /= sum;
    return h;
}

AudioBuffer decimate_2x(const AudioBuffer& audio) {
    if (audio.sample_rate_hz <= 0 || audio.sample_rate_hz % 2 != 0)
        throw PreconditionError(
            fmt::format("decimate_2x needs an even sample rate, got {} Hz", audio.sample_rate_hz));
    static const std::vector<double> taps = decimator_taps();
    constexpr std::ptrdiff_t mid = kDecimatorTaps / 2;

    const auto& x = audio.samples;
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    AudioBuffer out;
    out.sample_rate_hz = audio.sample_rate_hz / 2;
    out.samples.resize((x.size() + 1) / 2);
    for (std::size_t m = 0; m < out.samples.size(); ++m) {
        const std::ptrdiff_t centre = 2 * static_cast<std::ptrdiff_t>(m);
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, centre - mid);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, centre + mid);
        double acc = 0.0;
        for (std::ptrdiff_t i = lo; i <= hi; ++i) acc += taps[static_cast<std::size_t>(i - centre + mid)] * x[i];
        out.samples[m] = acc;
    }
    return out;
}

}  // namespace qbe::featio
