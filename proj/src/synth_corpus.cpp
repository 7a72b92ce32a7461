#include "pemux/synth_corpus.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pemux/rng.hpp"

namespace pemux {

namespace {

namespace fs = std::filesystem;

// Fixed structural layout of a generated file:
//   [0,64)    DOS header (classic template, e_lfanew = 128)
//   [64,128)  stub area: family-biased bytes, header motifs land here
//   [128,248) PE signature + COFF header + 96-byte optional header
//   [248,..)  section table, 2 or 3 entries of 40 bytes
//   [..,size) slack + section raw data, family-biased bytes
constexpr std::uint32_t kLfanew = 128;
constexpr std::uint16_t kOptSize = 96;
constexpr std::size_t kTableStart = kLfanew + 24;
constexpr std::size_t kDataStart = 384;  // 64-byte aligned, past a 3-entry table
constexpr std::uint16_t kMachineI386 = 0x014C;
constexpr std::uint16_t kCharacteristics = 0x0102;  // executable, 32-bit
constexpr std::uint32_t kImageBase = 0x00400000;

const std::uint8_t kDosTemplate[64] = {
    0x4D, 0x5A, 0x90, 0x00, 0x03, 0x00, 0x00, 0x00, 0x04, 0x00, 0x00, 0x00, 0xFF, 0xFF, 0x00, 0x00,
    0xB8, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80, 0x00, 0x00, 0x00,
};

struct SectionDef {
    const char* name;
    std::uint32_t characteristics;
};

const SectionDef kSectionDefs[3] = {
    {".text", 0x60000020},
    {".data", 0xC0000040},
    {".rdata", 0x40000040},
};

void put_u16(std::vector<std::uint8_t>& b, std::size_t off, std::uint16_t v) {
    b[off] = static_cast<std::uint8_t>(v & 0xFF);
    b[off + 1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::vector<std::uint8_t>& b, std::size_t off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}

// Sampling from byte_bias goes through an explicit CDF + binary search so the
// draw sequence is pinned down exactly (see Rng).
std::array<double, 256> bias_cdf(const std::array<double, 256>& bias) {
    std::array<double, 256> cdf{};
    double total = 0.0;
    for (double w : bias) total += w;
    double acc = 0.0;
    for (std::size_t i = 0; i < 256; ++i) {
        acc += bias[i] / total;
        cdf[i] = acc;
    }
    cdf[255] = 1.0;
    return cdf;
}

std::uint8_t draw_byte(const std::array<double, 256>& cdf, Rng& rng) {
    double u = rng.uniform();
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return static_cast<std::uint8_t>(it - cdf.begin());
}

}  // namespace

void FamilySpec::validate() const {
    if (name.empty()) throw Error(Errc::ConfigError, "family spec: empty name");
    double total = 0.0;
    for (double w : byte_bias) {
        if (w < 0.0) throw Error(Errc::ConfigError, "family " + name + ": negative byte_bias entry");
        total += w;
    }
    if (total <= 0.0) throw Error(Errc::ConfigError, "family " + name + ": byte_bias is all zero");
    if (size_min < 1024)
        throw Error(Errc::ConfigError, "family " + name + ": size_range.min must be >= 1024");
    if (size_max < size_min)
        throw Error(Errc::ConfigError, "family " + name + ": size_range.max < size_range.min");
    if (sample_count == 0)
        throw Error(Errc::ConfigError, "family " + name + ": sample_count is zero");
}

SampleData generate_family_sample(const FamilySpec& spec, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    const std::array<double, 256> cdf = bias_cdf(spec.byte_bias);

    const std::size_t size = spec.size_min + rng.below(spec.size_max - spec.size_min + 1);
    const std::uint16_t nsec = static_cast<std::uint16_t>(2 + rng.below(2));
    const std::uint32_t timestamp = 0x40000000u + static_cast<std::uint32_t>(rng.below(0x20000000u));
    const std::uint32_t entry_delta = static_cast<std::uint32_t>(4 * rng.below(13));  // 0..48

    const std::size_t table_end = kTableStart + kOptSize + nsec * 40;

    std::vector<std::uint8_t> bytes(size, 0);

    // Free bytes: stub + everything past the section table.
    for (std::size_t i = 64; i < kLfanew; ++i) bytes[i] = draw_byte(cdf, rng);
    for (std::size_t i = table_end; i < size; ++i) bytes[i] = draw_byte(cdf, rng);

    // DOS header
    std::memcpy(bytes.data(), kDosTemplate, 64);
    put_u32(bytes, 60, kLfanew);

    // NT headers
    put_u32(bytes, kLfanew, kPeSignature);
    put_u16(bytes, kLfanew + 4, kMachineI386);
    put_u16(bytes, kLfanew + 6, nsec);
    put_u32(bytes, kLfanew + 8, timestamp);
    put_u16(bytes, kLfanew + 20, kOptSize);
    put_u16(bytes, kLfanew + 22, kCharacteristics);

    const std::size_t opt = kLfanew + 24;
    put_u16(bytes, opt, 0x010B);  // PE32 magic
    bytes[opt + 2] = 14;          // linker major
    put_u32(bytes, opt + 28, kImageBase);
    // entry point filled below; data-directory count stays 0 (96-byte header)

    // Section table: contiguous raw data covering [kDataStart, size).
    LayoutRecord layout;
    const std::size_t data_total = size - kDataStart;
    std::size_t raw_offset = kDataStart;
    std::uint32_t va = 0x1000;
    for (std::uint16_t i = 0; i < nsec; ++i) {
        std::size_t raw_size;
        if (i + 1 == nsec) {
            raw_size = size - raw_offset;
        } else {
            raw_size = ((data_total / nsec) / 64) * 64;
        }
        SectionEntry s;
        std::memset(s.name.data(), 0, 8);
        std::memcpy(s.name.data(), kSectionDefs[i].name, std::strlen(kSectionDefs[i].name));
        s.raw_size = static_cast<std::uint32_t>(raw_size);
        s.raw_offset = static_cast<std::uint32_t>(raw_offset);
        s.virtual_size = s.raw_size;
        s.virtual_address = va;
        s.characteristics = kSectionDefs[i].characteristics;

        const std::size_t e = kTableStart + kOptSize + static_cast<std::size_t>(i) * 40;
        std::memcpy(bytes.data() + e, s.name.data(), 8);
        put_u32(bytes, e + 8, s.virtual_size);
        put_u32(bytes, e + 12, s.virtual_address);
        put_u32(bytes, e + 16, s.raw_size);
        put_u32(bytes, e + 20, s.raw_offset);
        put_u32(bytes, e + 36, s.characteristics);

        layout.sections.push_back(s);
        va += ((s.virtual_size + 0xFFF) / 0x1000) * 0x1000;
        raw_offset += raw_size;
    }

    const std::uint32_t entry_rva = 0x1000 + entry_delta;
    put_u32(bytes, opt + 16, entry_rva);

    // Plant the motif, skipping any byte that would land on a structural field.
    for (std::size_t off : spec.motif.offsets) {
        for (std::size_t k = 0; k < spec.motif.pattern.size(); ++k) {
            const std::size_t pos = off + k;
            if (pos >= size) break;
            const bool in_stub = pos >= 64 && pos < kLfanew;
            const bool in_data = pos >= table_end;
            if (in_stub || in_data) bytes[pos] = spec.motif.pattern[k];
        }
    }

    layout.file_size = size;
    layout.e_lfanew = kLfanew;
    layout.machine = kMachineI386;
    layout.number_of_sections = nsec;
    layout.timestamp = timestamp;
    layout.optional_header_size = kOptSize;
    layout.characteristics = kCharacteristics;
    layout.entry_point_rva = entry_rva;
    layout.image_base = kImageBase;
    layout.entry_file_offset = kDataStart + entry_delta;

    return SampleData{std::move(bytes), std::move(layout)};
}

CorpusManifest generate_corpus(const std::vector<FamilySpec>& specs, std::uint64_t total_seed,
                               const std::string& out_dir) {
    if (specs.empty()) throw Error(Errc::ConfigError, "generate_corpus needs at least 1 spec");
    for (const FamilySpec& s : specs) s.validate();

    struct Job {
        std::size_t spec_idx;
        std::size_t sample_idx;   // within the spec row
        std::size_t family_idx;   // within the family name, across rows
        std::uint64_t seed;
    };

    // Per-family file indices continue across rows sharing a name.
    std::vector<Job> jobs;
    {
        std::vector<std::pair<std::string, std::size_t>> name_counts;
        for (std::size_t r = 0; r < specs.size(); ++r) {
            std::size_t start = 0;
            for (auto& nc : name_counts) {
                if (nc.first == specs[r].name) start = nc.second;
            }
            for (std::size_t j = 0; j < specs[r].sample_count; ++j) {
                jobs.push_back(Job{r, j, start + j,
                                   derive_seed(total_seed, (static_cast<std::uint64_t>(r) << 32) | j)});
            }
            bool found = false;
            for (auto& nc : name_counts) {
                if (nc.first == specs[r].name) {
                    nc.second = start + specs[r].sample_count;
                    found = true;
                }
            }
            if (!found) name_counts.emplace_back(specs[r].name, specs[r].sample_count);
        }
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    for (const FamilySpec& s : specs) fs::create_directories(fs::path(out_dir) / s.name, ec);

    CorpusManifest manifest;
    manifest.seed = total_seed;
    manifest.rows.resize(jobs.size());

    bool io_failed = false;
    std::string io_message;

#pragma omp parallel for schedule(dynamic)
    for (long long ji = 0; ji < static_cast<long long>(jobs.size()); ++ji) {
        const Job& job = jobs[static_cast<std::size_t>(ji)];
        const FamilySpec& spec = specs[job.spec_idx];
        SampleData sample = generate_family_sample(spec, job.seed);

        const std::string rel = spec.name + "/" + std::to_string(job.family_idx) + ".bin";
        const fs::path full = fs::path(out_dir) / rel;
        std::ofstream out(full, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(sample.bytes.data()),
                  static_cast<std::streamsize>(sample.bytes.size()));
        if (!out) {
#pragma omp critical
            {
                io_failed = true;
                io_message = "failed to write " + full.string();
            }
        }

        ManifestRow& row = manifest.rows[static_cast<std::size_t>(ji)];
        row.path = rel;
        row.label = spec.name;
        row.layout = std::move(sample.layout);
    }

    if (io_failed) throw Error(Errc::IoError, io_message);

    write_manifest_csv(manifest, (fs::path(out_dir) / "manifest.csv").string());
    return manifest;
}

std::vector<FamilySpec> default_family_specs() {
    // Byte-value bands. Families delta/epsilon sit exactly between alpha's
    // two flavors along the center-vs-side mass axis, which makes the
    // sections histograms of the default corpus non-linearly separable.
    auto banded = [](double center_w, double side_w) {
        std::array<double, 256> bias{};
        for (int v = 0x70; v <= 0x8F; ++v) bias[v] = center_w / 32.0;
        for (int v = 0x40; v <= 0x6F; ++v) bias[v] = side_w / 96.0;
        for (int v = 0x90; v <= 0xBF; ++v) bias[v] = side_w / 96.0;
        return bias;
    };
    std::array<double, 256> bright{};
    for (int v = 0xC8; v <= 0xF7; ++v) bright[v] = 1.0 / 48.0;

    auto ramp = [](std::uint8_t base, std::size_t len) {
        std::vector<std::uint8_t> p(len);
        for (std::size_t i = 0; i < len; ++i) p[i] = static_cast<std::uint8_t>(base + i);
        return p;
    };

    // beta and gamma carry the same byte multiset at the same offset but in a
    // different order: one long edge vs. short stripes. Histograms cannot
    // tell them apart; sequence and image models can.
    std::vector<std::uint8_t> edge(64, 0x00);
    std::fill(edge.begin(), edge.begin() + 32, 0xFF);
    std::vector<std::uint8_t> stripes(64, 0x00);
    for (std::size_t i = 0; i < 64; ++i) stripes[i] = (i / 4) % 2 == 0 ? 0xFF : 0x00;

    std::vector<std::uint8_t> alternating(24);
    for (std::size_t i = 0; i < 24; ++i) alternating[i] = i % 2 == 0 ? 0x01 : 0x1F;
    std::vector<std::uint8_t> high_cycle(24);
    for (std::size_t i = 0; i < 24; ++i) high_cycle[i] = static_cast<std::uint8_t>(0xF8 + i % 8);

    const std::size_t lo = 2048, hi = 10240;
    std::vector<FamilySpec> specs;

    FamilySpec alpha_a{"alpha", banded(0.95, 0.05), Motif{ramp(0x20, 24), {80}}, 500, lo, hi};
    FamilySpec alpha_b{"alpha", banded(0.05, 0.95), Motif{ramp(0x20, 24), {80}}, 500, lo, hi};
    FamilySpec beta{"beta", bright, Motif{edge, {1100}}, 560, lo, hi};
    FamilySpec gamma{"gamma", bright, Motif{stripes, {1100}}, 300, lo, hi};
    FamilySpec delta{"delta", banded(0.5, 0.5), Motif{high_cycle, {80}}, 160, lo, hi};
    FamilySpec epsilon{"epsilon", banded(0.5, 0.5), Motif{alternating, {80}}, 94, lo, hi};

    specs.push_back(alpha_a);
    specs.push_back(alpha_b);
    specs.push_back(beta);
    specs.push_back(gamma);
    specs.push_back(delta);
    specs.push_back(epsilon);
    return specs;
}

void write_manifest_csv(const CorpusManifest& manifest, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open manifest for writing: " + path);
    out << "path,label\n";
    for (const ManifestRow& row : manifest.rows) out << row.path << "," << row.label << "\n";
    if (!out) throw Error(Errc::IoError, "failed writing manifest: " + path);
}

std::vector<std::pair<std::string, std::string>> load_manifest_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::DataError, "cannot open manifest: " + path);
    const std::string base = fs::path(path).parent_path().string();

    std::vector<std::pair<std::string, std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            first = false;
            if (line != "path,label")
                throw Error(Errc::DataError, "manifest " + path + ": bad header line");
            continue;
        }
        if (line.empty()) continue;
        const std::size_t comma = line.rfind(',');
        if (comma == std::string::npos)
            throw Error(Errc::DataError, "manifest " + path + ": row without comma: " + line);
        std::string rel = line.substr(0, comma);
        std::string label = line.substr(comma + 1);
        if (rel.empty() || label.empty())
            throw Error(Errc::DataError, "manifest " + path + ": empty field in row: " + line);
        std::string full = base.empty() ? rel : (fs::path(base) / rel).string();
        rows.emplace_back(std::move(full), std::move(label));
    }
    return rows;
}

namespace {

// "lo..hi" with decimal or 0x-prefixed bounds
std::pair<long long, long long> parse_range(const std::string& text, int line_no) {
    const std::size_t dots = text.find("..");
    if (dots == std::string::npos)
        throw Error(Errc::ConfigError,
                    "spec line " + std::to_string(line_no) + ": expected LO..HI, got '" + text + "'");
    try {
        long long lo = std::stoll(text.substr(0, dots), nullptr, 0);
        long long hi = std::stoll(text.substr(dots + 2), nullptr, 0);
        return {lo, hi};
    } catch (const std::exception&) {
        throw Error(Errc::ConfigError,
                    "spec line " + std::to_string(line_no) + ": bad number in range '" + text + "'");
    }
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<FamilySpec> parse_family_specs(const std::string& text) {
    std::vector<FamilySpec> specs;
    FamilySpec current;
    bool open = false;

    auto flush = [&](int line_no) {
        if (!open) return;
        try {
            current.validate();
        } catch (const Error& e) {
            throw Error(Errc::ConfigError,
                        "spec line " + std::to_string(line_no) + ": " + e.what());
        }
        specs.push_back(current);
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s == "[family]") {
            flush(line_no);
            current = FamilySpec{};
            open = true;
            continue;
        }
        if (!open)
            throw Error(Errc::ConfigError,
                        "spec line " + std::to_string(line_no) + ": key outside a [family] block");
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw Error(Errc::ConfigError,
                        "spec line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));

        if (key == "name") {
            current.name = value;
        } else if (key == "count") {
            try {
                current.sample_count = static_cast<std::size_t>(std::stoull(value));
            } catch (const std::exception&) {
                throw Error(Errc::ConfigError,
                            "spec line " + std::to_string(line_no) + ": bad count '" + value + "'");
            }
        } else if (key == "size") {
            auto [lo, hi] = parse_range(value, line_no);
            if (lo < 0 || hi < lo)
                throw Error(Errc::ConfigError,
                            "spec line " + std::to_string(line_no) + ": bad size range");
            current.size_min = static_cast<std::size_t>(lo);
            current.size_max = static_cast<std::size_t>(hi);
        } else if (key == "bias") {
            const std::size_t colon = value.rfind(':');
            if (colon == std::string::npos)
                throw Error(Errc::ConfigError, "spec line " + std::to_string(line_no) +
                                                   ": expected bias = LO..HI : WEIGHT");
            auto [lo, hi] = parse_range(trim(value.substr(0, colon)), line_no);
            double w;
            try {
                w = std::stod(value.substr(colon + 1));
            } catch (const std::exception&) {
                throw Error(Errc::ConfigError,
                            "spec line " + std::to_string(line_no) + ": bad bias weight");
            }
            if (lo < 0 || hi > 255 || hi < lo || w < 0)
                throw Error(Errc::ConfigError,
                            "spec line " + std::to_string(line_no) + ": bias range out of [0,255]");
            for (long long v = lo; v <= hi; ++v) current.byte_bias[static_cast<std::size_t>(v)] += w;
        } else if (key == "motif") {
            if (value.size() % 2 != 0)
                throw Error(Errc::ConfigError,
                            "spec line " + std::to_string(line_no) + ": motif hex has odd length");
            current.motif.pattern.clear();
            for (std::size_t i = 0; i < value.size(); i += 2) {
                try {
                    current.motif.pattern.push_back(
                        static_cast<std::uint8_t>(std::stoul(value.substr(i, 2), nullptr, 16)));
                } catch (const std::exception&) {
                    throw Error(Errc::ConfigError,
                                "spec line " + std::to_string(line_no) + ": bad motif hex");
                }
            }
        } else if (key == "motif_offsets") {
            current.motif.offsets.clear();
            std::istringstream offs(value);
            std::string tok;
            while (std::getline(offs, tok, ',')) {
                tok = trim(tok);
                if (tok.empty()) continue;
                try {
                    current.motif.offsets.push_back(static_cast<std::size_t>(std::stoull(tok, nullptr, 0)));
                } catch (const std::exception&) {
                    throw Error(Errc::ConfigError,
                                "spec line " + std::to_string(line_no) + ": bad offset '" + tok + "'");
                }
            }
        } else {
            throw Error(Errc::ConfigError,
                        "spec line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    flush(line_no);
    if (specs.empty()) throw Error(Errc::ConfigError, "spec file defines no [family] blocks");
    return specs;
}

}  // namespace pemux
