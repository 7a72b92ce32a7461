#include "pemux/fusion.hpp"

#include <algorithm>

namespace pemux {

std::vector<double> fuse(const ProbVector& p_header, const ProbVector& p_sections) {
    if (p_header.size() != p_sections.size())
        throw Error(Errc::LengthMismatch, "fuse: halves of length " +
                                              std::to_string(p_header.size()) + " and " +
                                              std::to_string(p_sections.size()));
    std::vector<double> out;
    out.reserve(p_header.size() * 2);
    out.insert(out.end(), p_header.begin(), p_header.end());
    out.insert(out.end(), p_sections.begin(), p_sections.end());
    return out;
}

DataMatrix fused_matrix(const DataMatrix& header_probs, const DataMatrix& sections_probs,
                        const std::vector<Partition>& tags, Partition keep) {
    if (header_probs.rows != sections_probs.rows || header_probs.rows != tags.size())
        throw Error(Errc::ShapeMismatch, "fused_matrix: row counts disagree");
    DataMatrix out;
    out.cols = header_probs.cols + sections_probs.cols;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        if (tags[i] != keep) continue;
        const auto h = header_probs.row(i);
        const auto s = sections_probs.row(i);
        std::vector<double> row(h.begin(), h.end());
        row.insert(row.end(), s.begin(), s.end());
        out.push_row(row);
    }
    return out;
}

FusionModel train_fusion(const FusionSpec& spec, const RegionModel& header_model,
                         const RegionModel& sections_model, const Dataset& ds) {
    if (header_model.region != Region::Header)
        throw Error(Errc::ConfigError, "train_fusion: header component not trained on the header");
    if (sections_model.region != Region::Sections)
        throw Error(Errc::ConfigError, "train_fusion: sections component not trained on sections");
    if (header_model.kind != spec.header_kind || sections_model.kind != spec.sections_kind)
        throw Error(Errc::ConfigError, "train_fusion: component kinds do not match the spec");
    if (ds.tags.size() != ds.size())
        throw Error(Errc::ConfigError, "train_fusion: dataset has no partition tags");

    const DataMatrix h_probs = header_model.probabilities_batch(ds.files);
    const DataMatrix s_probs = sections_model.probabilities_batch(ds.files);

    const DataMatrix fused = fused_matrix(h_probs, s_probs, ds.tags, Partition::Train);
    std::vector<int> train_labels;
    train_labels.reserve(fused.rows);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.tags[i] == Partition::Train) train_labels.push_back(ds.labels[i]);

    FusionModel model;
    model.header = header_model;
    model.sections = sections_model;
    model.labels = ds.label_names;
    model.classifier = train_multiclass(fused, train_labels, ds.num_classes(), spec.svm);
    return model;
}

FusionPrediction fusion_predict_bytes(const FusionModel& model,
                                      std::span<const std::uint8_t> bytes) {
    PeFile pe;
    try {
        pe = parse_pe(bytes);
    } catch (const Error& e) {
        rethrow_with_stage(e, "parse");
    }
    return fusion_predict(model, pe);
}

FusionPrediction fusion_predict(const FusionModel& model, const PeFile& pe) {
    ProbVector p_h, p_s;
    try {
        p_h = model.header.probabilities(pe);
    } catch (const Error& e) {
        rethrow_with_stage(e, "header-model");
    }
    try {
        p_s = model.sections.probabilities(pe);
    } catch (const Error& e) {
        rethrow_with_stage(e, "sections-model");
    }

    const std::vector<double> feature = fuse(p_h, p_s);
    FusionPrediction pred;
    pred.probabilities = predict_proba(model.classifier, feature);
    pred.label_index = static_cast<std::size_t>(
        std::max_element(pred.probabilities.begin(), pred.probabilities.end()) -
        pred.probabilities.begin());
    pred.label = pred.label_index < model.labels.size() ? model.labels[pred.label_index]
                                                        : std::to_string(pred.label_index);
    return pred;
}

}  // namespace pemux
