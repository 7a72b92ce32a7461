#include "pemux/pe_format.hpp"

#include <algorithm>
#include <cstring>

namespace pemux {

namespace {

std::uint16_t read_u16(std::span<const std::uint8_t> buf, std::size_t off) {
    return static_cast<std::uint16_t>(buf[off] | (buf[off + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> buf, std::size_t off) {
    return static_cast<std::uint32_t>(buf[off]) | (static_cast<std::uint32_t>(buf[off + 1]) << 8) |
           (static_cast<std::uint32_t>(buf[off + 2]) << 16) |
           (static_cast<std::uint32_t>(buf[off + 3]) << 24);
}

[[noreturn]] void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace

std::string SectionEntry::name_str() const {
    std::size_t len = 0;
    while (len < name.size() && name[len] != '\0') ++len;
    return std::string(name.data(), len);
}

const char* region_name(Region r) noexcept {
    switch (r) {
        case Region::Header: return "header";
        case Region::Sections: return "sections";
        case Region::Entire: return "entire";
    }
    return "?";
}

const char* sections_mode_name(SectionsMode m) noexcept {
    return m == SectionsMode::Offset324 ? "offset324" : "entrypoint";
}

PeFile parse_pe(std::span<const std::uint8_t> buffer) {
    const std::size_t n = buffer.size();
    if (n < kHeaderRegionSize) {
        fail(Errc::FileTooShort, "file has " + std::to_string(n) + " bytes, minimum is " +
                                     std::to_string(kHeaderRegionSize));
    }

    PeFile pe;
    pe.dos.e_magic = read_u16(buffer, 0);
    if (pe.dos.e_magic != kDosMagic) {
        fail(Errc::BadMagic, "e_magic is not MZ");
    }
    std::copy_n(buffer.begin(), kDosHeaderSize, pe.dos.raw.begin());
    pe.dos.e_lfanew = read_u32(buffer, 60);

    const std::size_t lfanew = pe.dos.e_lfanew;
    // Signature (4) + COFF file header (20) must fit, and the offset must be
    // 4-byte aligned and beyond the DOS header.
    if (lfanew < kDosHeaderSize || lfanew % 4 != 0 || lfanew + 24 > n) {
        fail(Errc::BadNtOffset, "e_lfanew " + std::to_string(lfanew) + " invalid for file of " +
                                    std::to_string(n) + " bytes");
    }

    pe.nt.signature = read_u32(buffer, lfanew);
    if (pe.nt.signature != kPeSignature) {
        fail(Errc::BadSignature, "NT signature is not PE\\0\\0");
    }
    pe.nt.machine = read_u16(buffer, lfanew + 4);
    pe.nt.number_of_sections = read_u16(buffer, lfanew + 6);
    pe.nt.timestamp = read_u32(buffer, lfanew + 8);
    pe.nt.optional_header_size = read_u16(buffer, lfanew + 20);
    pe.nt.characteristics = read_u16(buffer, lfanew + 22);

    const std::size_t opt_start = lfanew + 24;
    const std::size_t opt_size = pe.nt.optional_header_size;
    // Entry point (offset 16) and PE32 image base (offset 28) are the only
    // optional-header fields consumed downstream.
    if (opt_size < 32 || opt_start + opt_size > n) {
        fail(Errc::TruncatedSectionTable,
             "optional header of " + std::to_string(opt_size) + " bytes does not fit");
    }
    pe.nt.entry_point_rva = read_u32(buffer, opt_start + 16);
    pe.nt.image_base = read_u32(buffer, opt_start + 28);

    const std::size_t table_start = opt_start + opt_size;
    const std::size_t nsec = pe.nt.number_of_sections;
    if (table_start + nsec * 40 > n) {
        fail(Errc::TruncatedSectionTable, "section table of " + std::to_string(nsec) +
                                              " entries does not fit at offset " +
                                              std::to_string(table_start));
    }

    pe.sections.reserve(nsec);
    for (std::size_t i = 0; i < nsec; ++i) {
        const std::size_t e = table_start + i * 40;
        SectionEntry s;
        std::memcpy(s.name.data(), buffer.data() + e, 8);
        s.virtual_size = read_u32(buffer, e + 8);
        s.virtual_address = read_u32(buffer, e + 12);
        s.raw_size = read_u32(buffer, e + 16);
        s.raw_offset = read_u32(buffer, e + 20);
        s.characteristics = read_u32(buffer, e + 36);
        if (static_cast<std::uint64_t>(s.raw_offset) + s.raw_size > n) {
            fail(Errc::TruncatedSectionTable,
                 "section " + std::to_string(i) + " raw data [" + std::to_string(s.raw_offset) +
                     ", +" + std::to_string(s.raw_size) + ") exceeds file size");
        }
        pe.sections.push_back(s);
    }

    pe.bytes.assign(buffer.begin(), buffer.end());
    return pe;
}

std::size_t entry_point_file_offset(const PeFile& pe) {
    const std::uint32_t rva = pe.nt.entry_point_rva;
    for (const SectionEntry& s : pe.sections) {
        if (rva >= s.virtual_address &&
            static_cast<std::uint64_t>(rva) < static_cast<std::uint64_t>(s.virtual_address) + s.raw_size) {
            return s.raw_offset + (rva - s.virtual_address);
        }
    }
    throw Error(Errc::EntryPointUnmapped,
                "entry point RVA " + std::to_string(rva) + " not covered by any section");
}

std::size_t region_offset(const PeFile& pe, Region region, SectionsMode mode) {
    switch (region) {
        case Region::Header:
        case Region::Entire:
            return 0;
        case Region::Sections:
            return mode == SectionsMode::Offset324 ? kHeaderRegionSize : entry_point_file_offset(pe);
    }
    return 0;
}

std::span<const std::uint8_t> region_bytes(const PeFile& pe, Region region, SectionsMode mode) {
    std::span<const std::uint8_t> all(pe.bytes);
    switch (region) {
        case Region::Header:
            return all.subspan(0, kHeaderRegionSize);
        case Region::Sections: {
            std::size_t start = region_offset(pe, region, mode);
            if (start > all.size()) start = all.size();
            return all.subspan(start);
        }
        case Region::Entire:
            return all;
    }
    return all;
}

}  // namespace pemux
