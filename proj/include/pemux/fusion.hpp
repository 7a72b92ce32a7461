#pragma once

#include <string>
#include <vector>

#include "pemux/dataset.hpp"
#include "pemux/region_model.hpp"
#include "pemux/svm.hpp"

namespace pemux {

// One of the nine (header-model, sections-model) stacking combinations,
// classified by an SVM over the concatenated probability vectors.
struct FusionSpec {
    ModelKind header_kind = ModelKind::Svm;
    ModelKind sections_kind = ModelKind::Svm;
    SvmConfig svm;
};

// Concatenation p_header || p_sections; length 2K (10 for the five-class
// task). Throws LengthMismatch when the halves disagree in length.
std::vector<double> fuse(const ProbVector& p_header, const ProbVector& p_sections);

// Builds the fused feature matrix for the rows carrying the given partition
// tag. This is the single path fused training/eval features come from, so
// test-partition samples can never leak into fusion training.
DataMatrix fused_matrix(const DataMatrix& header_probs, const DataMatrix& sections_probs,
                        const std::vector<Partition>& tags, Partition keep);

struct FusionModel {
    RegionModel header;
    RegionModel sections;
    SvmModel classifier;
    std::vector<std::string> labels;
};

// Trains the stacking SVM on fused features from the training partition
// only. The component models must already be trained (on that same
// partition); their probabilities on the training rows become the features.
FusionModel train_fusion(const FusionSpec& spec, const RegionModel& header_model,
                         const RegionModel& sections_model, const Dataset& ds);

struct FusionPrediction {
    std::size_t label_index = 0;
    std::string label;
    ProbVector probabilities;
};

// End to end: parse regions, featurize per component, fuse, classify.
// Upstream errors are rethrown with the failing stage named.
FusionPrediction fusion_predict(const FusionModel& model, const PeFile& pe);

// Same, starting from raw bytes; parse failures surface as stage "parse".
FusionPrediction fusion_predict_bytes(const FusionModel& model,
                                      std::span<const std::uint8_t> bytes);

}  // namespace pemux
