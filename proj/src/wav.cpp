#include "svkit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace svkit {

namespace {

std::uint32_t le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

void put16(std::ostream& os, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<char*>(b), 2);
}

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError(msg("cannot open ", path));
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError(msg(path, ": not a RIFF/WAVE file"));

    std::size_t pos = 12;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_len = 0;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t chunk_len = le32(bytes.data() + pos + 4);
        const unsigned char* chunk = bytes.data() + pos + 8;
        if (pos + 8 + chunk_len > bytes.size())
            throw DataError(msg(path, ": truncated chunk"));
        if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw DataError(msg(path, ": malformed fmt chunk"));
            format = le16(chunk);
            channels = le16(chunk + 2);
            rate = le32(chunk + 4);
            bits = le16(chunk + 14);
        } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            data = chunk;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (format == 0 || data == nullptr) throw DataError(msg(path, ": missing fmt/data chunk"));
    if (format != 1 || bits != 16)
        throw DataError(msg(path, ": unsupported codec (need PCM 16-bit, got format ",
                            format, ", ", bits, " bits)"));
    if (channels == 0 || channels > 2)
        throw DataError(msg(path, ": unsupported channel count ", channels));

    const std::size_t frames = data_len / (2 * channels);
    Waveform w;
    w.sample_rate = rate;
    w.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        float acc = 0;
        for (std::size_t c = 0; c < channels; ++c) {
            const std::int16_t s =
                static_cast<std::int16_t>(le16(data + 2 * (i * channels + c)));
            acc += static_cast<float>(s) / 32768.0f;
        }
        w.samples[i] = acc / static_cast<float>(channels);
    }
    if (w.sample_rate != 16000) w = resample(w, 16000);
    return w;
}

Waveform resample(const Waveform& in, std::size_t target_rate) {
    if (in.sample_rate == target_rate) return in;
    if (in.samples.empty()) return {{}, target_rate};
    const double ratio =
        static_cast<double>(target_rate) / static_cast<double>(in.sample_rate);
    const std::size_t out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(in.samples.size()) * ratio));
    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(out_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double t = static_cast<double>(i) / ratio;
        const std::size_t lo = std::min(static_cast<std::size_t>(t), in.samples.size() - 1);
        const std::size_t hi = std::min(lo + 1, in.samples.size() - 1);
        const double frac = t - static_cast<double>(lo);
        out.samples[i] = static_cast<float>((1.0 - frac) * in.samples[lo] +
                                            frac * in.samples[hi]);
    }
    return out;
}

void write_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError(msg("cannot write ", path));
    const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    put32(os, 36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put32(os, 16);
    put16(os, 1);  // PCM
    put16(os, 1);  // mono
    put32(os, static_cast<std::uint32_t>(w.sample_rate));
    put32(os, static_cast<std::uint32_t>(w.sample_rate * 2));
    put16(os, 2);
    put16(os, 16);
    os.write("data", 4);
    put32(os, data_len);
    for (float v : w.samples) {
        const float clipped = std::clamp(v, -1.0f, 1.0f);
        const int q = static_cast<int>(std::lround(clipped * 32767.0f));
        put16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
    if (!os) throw DataError(msg("write failed for ", path));
}

}  // namespace svkit
