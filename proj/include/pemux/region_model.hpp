#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pemux/cnn.hpp"
#include "pemux/dataset.hpp"
#include "pemux/lstm.hpp"
#include "pemux/matrix.hpp"
#include "pemux/pe_format.hpp"
#include "pemux/svm.hpp"

namespace pemux {

enum class ModelKind : std::uint8_t { Svm = 0, Lstm = 1, Cnn = 2 };

const char* model_kind_name(ModelKind k) noexcept;  // "SVM" / "LSTM" / "CNN"

// The modality each model kind consumes, per region:
//   SVM  -> byte histogram of the region
//   LSTM -> byte sequence of the region (fixed length, zero right-padded)
//   CNN  -> byte image: 16x16 from file offset 0 for the header,
//           32x32 from the region start otherwise
std::vector<double> feature_row_histogram(const PeFile& pe, Region region, SectionsMode mode);
std::vector<double> feature_row_sequence(const PeFile& pe, Region region, SectionsMode mode,
                                         std::size_t seq_len);
std::vector<double> feature_row_image(const PeFile& pe, Region region, SectionsMode mode,
                                      std::size_t side);

// Feature matrices over a whole corpus; parallel across files.
DataMatrix featurize_histogram(const std::vector<PeFile>& files, Region region, SectionsMode mode);
DataMatrix featurize_sequence(const std::vector<PeFile>& files, Region region, SectionsMode mode,
                              std::size_t seq_len);
DataMatrix featurize_image(const std::vector<PeFile>& files, Region region, SectionsMode mode,
                           std::size_t side);

// A trained classifier bound to the region and feature modality it was
// trained on, carrying its class-label names. This is the unit the model
// container serializes and the fusion stage composes.
struct RegionModel {
    ModelKind kind = ModelKind::Svm;
    Region region = Region::Header;
    SectionsMode smode = SectionsMode::Offset324;
    std::size_t seq_len = 0;  // LSTM only
    std::vector<std::string> labels;
    std::variant<SvmModel, LstmWeights, CnnWeights> model;

    std::size_t num_classes() const { return labels.size(); }

    std::vector<double> feature_vector(const PeFile& pe) const;
    ProbVector probabilities(const PeFile& pe) const;

    // Probability rows for a whole corpus; parallel across files.
    DataMatrix probabilities_batch(const std::vector<PeFile>& files) const;
};

}  // namespace pemux
