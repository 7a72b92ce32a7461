#include "pemux/region_model.hpp"

#include "pemux/features.hpp"

namespace pemux {

const char* model_kind_name(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::Svm: return "SVM";
        case ModelKind::Lstm: return "LSTM";
        case ModelKind::Cnn: return "CNN";
    }
    return "?";
}

std::vector<double> feature_row_histogram(const PeFile& pe, Region region, SectionsMode mode) {
    const Histogram256 h = byte_histogram(region_bytes(pe, region, mode));
    return std::vector<double>(h.values.begin(), h.values.end());
}

std::vector<double> feature_row_sequence(const PeFile& pe, Region region, SectionsMode mode,
                                         std::size_t seq_len) {
    return byte_sequence(region_bytes(pe, region, mode), seq_len).values;
}

std::vector<double> feature_row_image(const PeFile& pe, Region region, SectionsMode mode,
                                      std::size_t side) {
    const std::size_t offset = region == Region::Sections ? region_offset(pe, region, mode) : 0;
    return byte_image(pe.bytes, side, offset).pixels;
}

namespace {

template <typename RowFn>
DataMatrix featurize(const std::vector<PeFile>& files, std::size_t cols, RowFn&& row_fn) {
    DataMatrix out(files.size(), cols);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(files.size()); ++i) {
        const std::vector<double> row = row_fn(files[static_cast<std::size_t>(i)]);
        std::copy(row.begin(), row.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

}  // namespace

DataMatrix featurize_histogram(const std::vector<PeFile>& files, Region region, SectionsMode mode) {
    return featurize(files, 256,
                     [&](const PeFile& pe) { return feature_row_histogram(pe, region, mode); });
}

DataMatrix featurize_sequence(const std::vector<PeFile>& files, Region region, SectionsMode mode,
                              std::size_t seq_len) {
    return featurize(files, seq_len, [&](const PeFile& pe) {
        return feature_row_sequence(pe, region, mode, seq_len);
    });
}

DataMatrix featurize_image(const std::vector<PeFile>& files, Region region, SectionsMode mode,
                           std::size_t side) {
    return featurize(files, side * side,
                     [&](const PeFile& pe) { return feature_row_image(pe, region, mode, side); });
}

std::vector<double> RegionModel::feature_vector(const PeFile& pe) const {
    switch (kind) {
        case ModelKind::Svm:
            return feature_row_histogram(pe, region, smode);
        case ModelKind::Lstm:
            return feature_row_sequence(pe, region, smode, seq_len);
        case ModelKind::Cnn:
            return feature_row_image(pe, region, smode, std::get<CnnWeights>(model).arch.side);
    }
    return {};
}

ProbVector RegionModel::probabilities(const PeFile& pe) const {
    const std::vector<double> x = feature_vector(pe);
    switch (kind) {
        case ModelKind::Svm:
            return predict_proba(std::get<SvmModel>(model), x);
        case ModelKind::Lstm:
            return lstm_forward(x, std::get<LstmWeights>(model));
        case ModelKind::Cnn:
            return cnn_forward(std::span<const double>(x), std::get<CnnWeights>(model));
    }
    return {};
}

DataMatrix RegionModel::probabilities_batch(const std::vector<PeFile>& files) const {
    DataMatrix out(files.size(), num_classes());
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(files.size()); ++i) {
        const ProbVector p = probabilities(files[static_cast<std::size_t>(i)]);
        std::copy(p.begin(), p.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

}  // namespace pemux
