#include "pemux/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "pemux/synth_corpus.hpp"

namespace pemux {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::DataError, "cannot open sample: " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw Error(Errc::DataError, "failed reading sample: " + path);
    return bytes;
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
    const auto rows = load_manifest_csv(manifest_path);
    if (rows.empty()) throw Error(Errc::DataError, "manifest has no samples: " + manifest_path);

    Dataset ds;
    ds.files.resize(rows.size());
    ds.labels.resize(rows.size());

    std::map<std::string, int> name_to_id;
    for (const auto& [path, label] : rows) name_to_id[label] = 0;
    int next = 0;
    for (auto& [name, id] : name_to_id) {
        id = next++;
        ds.label_names.push_back(name);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) ds.labels[i] = name_to_id[rows[i].second];

    bool failed = false;
    std::string message;
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(rows.size()); ++i) {
        const auto& [path, label] = rows[static_cast<std::size_t>(i)];
        try {
            const std::vector<std::uint8_t> bytes = read_file(path);
            ds.files[static_cast<std::size_t>(i)] = parse_pe(bytes);
        } catch (const Error& e) {
#pragma omp critical
            if (!failed) {
                failed = true;
                message = "sample " + path + ": " + e.what();
            }
        }
    }
    if (failed) throw Error(Errc::DataError, message);
    return ds;
}

}  // namespace pemux
