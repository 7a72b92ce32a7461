#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "pemux/features.hpp"
#include "pemux/rng.hpp"
#include "support/oracles.hpp"

using namespace pemux;

TEST_CASE("histogram of constant bytes") {
    std::vector<std::uint8_t> bytes(100, 0x00);
    const Histogram256 h = byte_histogram(bytes);
    CHECK(h.values[0] == 1.0);
    for (int v = 1; v < 256; ++v) CHECK(h.values[v] == 0.0);
}

TEST_CASE("histogram of two distinct bytes") {
    const std::vector<std::uint8_t> bytes = {0x00, 0xFF};
    const Histogram256 h = byte_histogram(bytes);
    CHECK(h.values[0] == 0.5);
    CHECK(h.values[255] == 0.5);
    CHECK(std::accumulate(h.values.begin(), h.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("histogram equals the counting oracle exactly on fuzzed buffers") {
    Rng rng(91);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<std::uint8_t> bytes(1 + rng.below(4096));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
        const Histogram256 h = byte_histogram(bytes);
        const auto expected = oracle::histogram_counts(bytes);
        for (int v = 0; v < 256; ++v) CHECK(h.values[v] == expected[v]);
        const double sum = std::accumulate(h.values.begin(), h.values.end(), 0.0);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("histogram is permutation invariant") {
    Rng rng(13);
    std::vector<std::uint8_t> bytes(997);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
    const Histogram256 before = byte_histogram(bytes);
    rng.shuffle(bytes);
    const Histogram256 after = byte_histogram(bytes);
    CHECK(before.values == after.values);
}

TEST_CASE("empty region is an error") {
    try {
        byte_histogram({});
        FAIL("expected EmptyRegion");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyRegion);
    }
}

TEST_CASE("byte sequence scaling and padding") {
    std::vector<std::uint8_t> exact(324, 0x80);
    CHECK(byte_sequence(exact, 324).values.size() == 324);
    CHECK(byte_sequence(exact, 324).values[0] == doctest::Approx(0x80 / 255.0));

    std::vector<std::uint8_t> shorter(500, 0x10);
    const ByteSeq padded = byte_sequence(shorter, 1000);
    REQUIRE(padded.values.size() == 1000);
    CHECK(padded.values[499] == doctest::Approx(0x10 / 255.0));
    for (std::size_t i = 500; i < 1000; ++i) CHECK(padded.values[i] == 0.0);

    const std::vector<std::uint8_t> endpoints = {0xFF, 0x00};
    const ByteSeq s = byte_sequence(endpoints, 2);
    CHECK(s.values[0] == 1.0);
    CHECK(s.values[1] == 0.0);
}

TEST_CASE("byte image layout follows the row-major matrix") {
    std::vector<std::uint8_t> bytes(1024);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i & 0xFF);

    const ByteImage header = byte_image(bytes, 16, 0);
    CHECK(header.at(1, 0) == doctest::Approx(bytes[16] / 255.0));
    CHECK(header.at(0, 1) == doctest::Approx(bytes[1] / 255.0));
    CHECK(header.at(15, 15) == doctest::Approx(bytes[255] / 255.0));

    const ByteImage full = byte_image(bytes, 32, 0);
    CHECK(full.pixels.size() == 1024);
    CHECK(full.at(31, 31) == doctest::Approx(bytes[1023] / 255.0));

    const ByteImage offset = byte_image(bytes, 16, 324);
    CHECK(offset.at(0, 0) == doctest::Approx(bytes[324] / 255.0));
    CHECK(offset.source_offset == 324);
}

TEST_CASE("all-zero input gives an all-zero image; shortfall pads with zero") {
    const std::vector<std::uint8_t> zeros(600, 0x00);
    const ByteImage img = byte_image(zeros, 32, 0);
    CHECK(std::all_of(img.pixels.begin(), img.pixels.end(), [](double p) { return p == 0.0; }));

    std::vector<std::uint8_t> tiny(10, 0xFF);
    const ByteImage padded = byte_image(tiny, 16, 0);
    CHECK(padded.at(0, 9) == 1.0);
    CHECK(padded.at(0, 10) == 0.0);
    CHECK(padded.at(15, 15) == 0.0);
}

TEST_CASE("sequence and image are prefix-determined") {
    Rng rng(55);
    std::vector<std::uint8_t> bytes(2000);
    for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));

    std::vector<std::uint8_t> extended = bytes;
    extended.resize(4000, 0xEE);

    CHECK(byte_sequence(bytes, 1000).values == byte_sequence(extended, 1000).values);
    CHECK(byte_image(bytes, 32, 0).pixels == byte_image(extended, 32, 0).pixels);
    CHECK(byte_image(bytes, 16, 324).pixels == byte_image(extended, 16, 324).pixels);
}

TEST_CASE("pgm rendering shape") {
    std::vector<std::uint8_t> bytes(256);
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(i);
    const std::string pgm = image_to_pgm(byte_image(bytes, 16, 0));
    CHECK(pgm.substr(0, 3) == "P2\n");
    CHECK(pgm.find("16 16") != std::string::npos);
    CHECK(std::count(pgm.begin(), pgm.end(), '\n') == 3 + 16);
}
