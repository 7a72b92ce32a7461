#include "pemux/features.hpp"

#include <cstdio>
#include <string>

namespace pemux {

Histogram256 byte_histogram(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw Error(Errc::EmptyRegion, "byte_histogram on empty region");
    std::array<std::size_t, 256> counts{};
    for (std::uint8_t b : bytes) ++counts[b];
    Histogram256 hist;
    const double inv = 1.0 / static_cast<double>(bytes.size());
    for (std::size_t v = 0; v < 256; ++v) hist.values[v] = static_cast<double>(counts[v]) * inv;
    return hist;
}

ByteSeq byte_sequence(std::span<const std::uint8_t> bytes, std::size_t target_len) {
    ByteSeq seq;
    seq.values.assign(target_len, 0.0);
    const std::size_t n = std::min(target_len, bytes.size());
    for (std::size_t i = 0; i < n; ++i) seq.values[i] = bytes[i] / 255.0;
    return seq;
}

ByteImage byte_image(std::span<const std::uint8_t> bytes, std::size_t side, std::size_t offset) {
    ByteImage img;
    img.side = side;
    img.source_offset = offset;
    img.pixels.assign(side * side, 0.0);
    for (std::size_t i = 0; i < side * side; ++i) {
        const std::size_t pos = offset + i;
        if (pos >= bytes.size()) break;
        img.pixels[i] = bytes[pos] / 255.0;
    }
    return img;
}

std::string image_to_pgm(const ByteImage& img) {
    std::string out = "P2\n" + std::to_string(img.side) + " " + std::to_string(img.side) + "\n255\n";
    char buf[8];
    for (std::size_t r = 0; r < img.side; ++r) {
        for (std::size_t c = 0; c < img.side; ++c) {
            int v = static_cast<int>(img.at(r, c) * 255.0 + 0.5);
            std::snprintf(buf, sizeof(buf), "%d", v);
            out += buf;
            out += (c + 1 == img.side) ? '\n' : ' ';
        }
    }
    return out;
}

}  // namespace pemux
