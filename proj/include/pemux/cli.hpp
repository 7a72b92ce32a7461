#pragma once

#include <cstdint>
#include <string>

#include "pemux/pipeline.hpp"

namespace pemux::cli {

// Command implementations behind the pemux binary; main() only parses flags.
// All of them throw pemux::Error, which main maps onto the exit-code
// taxonomy (0 ok, 2 config, 3 data/parse, 4 training divergence, 5 I/O).

struct GenArgs {
    std::string spec_path;  // empty: bundled default five-family spec
    std::string out_dir;
    std::uint64_t seed = 0;
};

// Returns the manifest path.
std::string cmd_gen(const GenArgs& args);

enum class Modality : std::uint8_t { Histogram = 0, Sequence = 1, Image = 2 };

Region parse_region(const std::string& text);          // throws ConfigError
Modality parse_modality(const std::string& text);      // throws ConfigError
SectionsMode parse_sections_mode(const std::string& text);
KernelKind parse_kernel(const std::string& text);

struct ExtractArgs {
    std::string manifest;
    Region region = Region::Header;
    Modality modality = Modality::Histogram;
    std::string out_path;
    SectionsMode smode = SectionsMode::Offset324;
    std::size_t seq_len = 1000;
    std::size_t side = 32;
};

// Returns the number of data rows written.
std::size_t cmd_extract(const ExtractArgs& args);

struct TrainArgs {
    std::string manifest;
    ModelKind kind = ModelKind::Svm;
    Region region = Region::Header;
    std::string out_path;
    ExperimentConfig config;  // seed and hyperparameters
};

// Trains one baseline on the 80% train partition, saves it, and returns its
// test-partition accuracy (identical to the matching report cell).
double cmd_train(const TrainArgs& args);

struct EvalArgs {
    std::string manifest;
    std::string model_path;
    std::uint64_t seed = 0;
    std::string expect_region;    // optional cross-check against the model file
    std::string expect_modality;  // optional cross-check
};

double cmd_eval(const EvalArgs& args);

struct FuseArgs {
    std::string manifest;
    std::string header_model_path;
    std::string sections_model_path;
    std::string out_path;
    std::uint64_t seed = 0;
    SvmConfig svm;
};

double cmd_fuse(const FuseArgs& args);

struct ReportArgs {
    std::string manifest;  // existing corpus, or
    std::string gen_dir;   // generate the default corpus here first
    std::string out_dir;
    ExperimentConfig config;
};

ExperimentReport cmd_report(const ReportArgs& args);

}  // namespace pemux::cli
