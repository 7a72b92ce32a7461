#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pemux/errors.hpp"

namespace pemux {

// The fixed split used for feature extraction: the "header" is always the
// first kHeaderRegionSize bytes of the file, independent of the actual
// structural header sizes. Structural parsing exists to validate files and
// to resolve the entry point.
inline constexpr std::size_t kHeaderRegionSize = 324;

inline constexpr std::uint16_t kDosMagic = 0x5A4D;       // "MZ"
inline constexpr std::uint32_t kPeSignature = 0x00004550;  // "PE\0\0"
inline constexpr std::size_t kDosHeaderSize = 64;

struct DosHeader {
    std::uint16_t e_magic = 0;
    std::uint32_t e_lfanew = 0;
    std::array<std::uint8_t, kDosHeaderSize> raw{};
};

struct NtHeaders {
    std::uint32_t signature = 0;
    std::uint16_t machine = 0;
    std::uint16_t number_of_sections = 0;
    std::uint32_t timestamp = 0;
    std::uint16_t optional_header_size = 0;
    std::uint16_t characteristics = 0;
    std::uint32_t entry_point_rva = 0;
    std::uint32_t image_base = 0;
};

struct SectionEntry {
    std::array<char, 8> name{};
    std::uint32_t virtual_size = 0;
    std::uint32_t virtual_address = 0;
    std::uint32_t raw_size = 0;
    std::uint32_t raw_offset = 0;
    std::uint32_t characteristics = 0;

    std::string name_str() const;
};

// Immutable after construction; safe to share across threads.
struct PeFile {
    DosHeader dos;
    NtHeaders nt;
    std::vector<SectionEntry> sections;
    std::vector<std::uint8_t> bytes;

    std::size_t size() const { return bytes.size(); }
};

enum class Region : std::uint8_t { Header = 0, Sections = 1, Entire = 2 };
enum class SectionsMode : std::uint8_t { Offset324 = 0, EntryPoint = 1 };

const char* region_name(Region r) noexcept;
const char* sections_mode_name(SectionsMode m) noexcept;

// Parses far enough to validate the structure and locate the regions used
// downstream. Read-only and deterministic; throws Error with one of
// {FileTooShort, BadMagic, BadNtOffset, BadSignature, TruncatedSectionTable}.
// All multi-byte fields are read little-endian.
PeFile parse_pe(std::span<const std::uint8_t> buffer);

// File offset of the entry point, resolved through the section table.
// Throws EntryPointUnmapped when no section's raw data covers the RVA.
std::size_t entry_point_file_offset(const PeFile& pe);

// View of the bytes backing one feature region. Header -> [0, 324);
// Sections/Offset324 -> [324, end); Sections/EntryPoint -> [entry, end);
// Entire -> the whole file.
std::span<const std::uint8_t> region_bytes(const PeFile& pe, Region region,
                                           SectionsMode mode = SectionsMode::Offset324);

// Starting file offset of a region, matching region_bytes.
std::size_t region_offset(const PeFile& pe, Region region,
                          SectionsMode mode = SectionsMode::Offset324);

}  // namespace pemux
