#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pemux/errors.hpp"

namespace pemux {

// Relative byte-value frequencies over a region; entries sum to 1.
struct Histogram256 {
    std::array<double, 256> values{};
};

// Bytes scaled to [0,1] by /255, truncated or zero-padded to a fixed length.
struct ByteSeq {
    std::vector<double> values;
};

// Square grayscale layout of side*side bytes, row-major, scaled to [0,1].
// pixel (r,c) = byte[source_offset + side*r + c] / 255, zero beyond the end.
struct ByteImage {
    std::vector<double> pixels;
    std::size_t side = 0;
    std::size_t source_offset = 0;

    double at(std::size_t r, std::size_t c) const { return pixels[r * side + c]; }
};

Histogram256 byte_histogram(std::span<const std::uint8_t> bytes);  // throws EmptyRegion
ByteSeq byte_sequence(std::span<const std::uint8_t> bytes, std::size_t target_len);
ByteImage byte_image(std::span<const std::uint8_t> bytes, std::size_t side, std::size_t offset = 0);

// Portable graymap (P2) text rendering of a byte image, for eyeballing.
std::string image_to_pgm(const ByteImage& img);

}  // namespace pemux
