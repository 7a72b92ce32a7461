#pragma once

#include <string>
#include <variant>

#include "pemux/fusion.hpp"
#include "pemux/region_model.hpp"

namespace pemux {

// Versioned tagged binary container for trained models; exact byte layout in
// docs/MODEL_FORMAT.md. Little-endian throughout, doubles as raw IEEE-754
// bits. Type tags: 1 SVM, 2 LSTM, 3 CNN (each wrapped in its region
// binding), 4 fusion bundle.
inline constexpr std::uint32_t kModelMagic = 0x58554D50;  // "PMUX"
inline constexpr std::uint32_t kModelVersion = 1;

void save_region_model(const RegionModel& model, const std::string& path);
void save_fusion_model(const FusionModel& model, const std::string& path);

using AnyModel = std::variant<RegionModel, FusionModel>;

// Throws DataError on bad magic/version/truncation, IoError on open failure.
AnyModel load_model(const std::string& path);

}  // namespace pemux
