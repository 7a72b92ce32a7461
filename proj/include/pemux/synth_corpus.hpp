#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pemux/pe_format.hpp"

namespace pemux {

struct Motif {
    std::vector<std::uint8_t> pattern;
    std::vector<std::size_t> offsets;  // absolute file offsets, family-specific
};

// Recipe for one generation cluster. A family label may be backed by more
// than one spec row (same name), which is how multimodal byte distributions
// within a single family are expressed.
struct FamilySpec {
    std::string name;
    std::array<double, 256> byte_bias{};  // nonnegative, not all zero
    Motif motif;
    std::size_t sample_count = 0;
    std::size_t size_min = 0;  // >= 1024 so 32x32 byte images never pad
    std::size_t size_max = 0;

    void validate() const;  // throws ConfigError on violated invariants
};

// Ground truth recorded at generation time; the parser round-trip tests
// compare parse_pe output against this field for field.
struct LayoutRecord {
    std::size_t file_size = 0;
    std::uint32_t e_lfanew = 0;
    std::uint16_t machine = 0;
    std::uint16_t number_of_sections = 0;
    std::uint32_t timestamp = 0;
    std::uint16_t optional_header_size = 0;
    std::uint16_t characteristics = 0;
    std::uint32_t entry_point_rva = 0;
    std::uint32_t image_base = 0;
    std::size_t entry_file_offset = 0;
    std::vector<SectionEntry> sections;
};

struct ManifestRow {
    std::string path;  // relative to the corpus root
    std::string label;
    LayoutRecord layout;
};

struct CorpusManifest {
    std::vector<ManifestRow> rows;
    std::uint64_t seed = 0;
};

struct SampleData {
    std::vector<std::uint8_t> bytes;
    LayoutRecord layout;
};

// Pure: identical (spec, seed) pairs produce identical bytes. The output
// always parses cleanly; motif bytes that would land on structural fields
// are skipped rather than planted.
SampleData generate_family_sample(const FamilySpec& spec, std::uint64_t rng_seed);

// Writes out_dir/<family>/<index>.bin for every sample plus
// out_dir/manifest.csv ("path,label" with one header line). Sample
// generation is parallel across files; per-sample seeds are derived from
// total_seed, so the corpus is byte-identical at any thread count.
CorpusManifest generate_corpus(const std::vector<FamilySpec>& specs, std::uint64_t total_seed,
                               const std::string& out_dir);

// The bundled five-family, 2114-sample recipe. Family signal placement is
// deliberately complementary: beta/gamma share a header signature and differ
// only in byte order deep in the sections region, delta/epsilon share the
// whole sections region and differ only inside the header, and alpha's byte
// distribution is a two-flavor mixture that straddles delta/epsilon's in
// histogram space.
std::vector<FamilySpec> default_family_specs();

// Manifest file I/O. Paths in the file are relative; load resolves them
// against the manifest's own directory.
void write_manifest_csv(const CorpusManifest& manifest, const std::string& path);
std::vector<std::pair<std::string, std::string>> load_manifest_csv(const std::string& path);

// Parses the plain-text family-spec format used by the CLI (see README).
// Throws ConfigError with a line number on malformed input.
std::vector<FamilySpec> parse_family_specs(const std::string& text);

}  // namespace pemux
