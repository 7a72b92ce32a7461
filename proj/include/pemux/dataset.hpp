#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pemux/pe_format.hpp"

namespace pemux {

enum class Partition : std::uint8_t { Train = 0, Test = 1 };

// A labeled, parsed corpus with its train/test partition. Labels are dense
// ids assigned to the sorted unique label names, so the mapping is
// deterministic regardless of manifest row order.
struct Dataset {
    std::vector<PeFile> files;
    std::vector<int> labels;
    std::vector<std::string> label_names;  // id -> name
    std::vector<Partition> tags;
    std::uint64_t seed = 0;

    std::size_t size() const { return files.size(); }
    std::size_t num_classes() const { return label_names.size(); }

    std::vector<std::size_t> rows_with(Partition p) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tags.size(); ++i)
            if (tags[i] == p) out.push_back(i);
        return out;
    }
};

// Reads and parses every file listed in the manifest (parallel across
// files). A file that fails to parse aborts the load with an error naming
// the sample. Partition tags are left empty; callers split afterwards.
Dataset load_dataset(const std::string& manifest_path);

}  // namespace pemux
