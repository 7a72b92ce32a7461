#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pemux/dataset.hpp"
#include "pemux/fusion.hpp"
#include "pemux/matrix.hpp"
#include "pemux/region_model.hpp"
#include "pemux/svm.hpp"
#include "pemux/train_common.hpp"

namespace pemux {

// Per-class test counts are round(count * test_frac) adjusted by at most one
// sample per class to hit the global round(N * test_frac). Deterministic
// under seed. Throws ClassTooSmall when any class has fewer than 2 samples.
std::vector<Partition> stratified_split(const std::vector<int>& labels, double test_frac,
                                        std::uint64_t seed);

// Stratified fold assignment in [0, k); per-class fold sizes differ by at
// most one. Throws ClassTooSmall when any class has fewer than k samples.
std::vector<int> kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

struct ConfusionCounts {
    std::size_t num_classes = 0;
    std::vector<std::size_t> matrix;  // K x K, matrix[actual * K + predicted]

    std::size_t at(std::size_t actual, std::size_t predicted) const {
        return matrix[actual * num_classes + predicted];
    }
    // One-vs-rest tallies for a class.
    std::size_t tp(std::size_t k) const;
    std::size_t fp(std::size_t k) const;
    std::size_t fn(std::size_t k) const;
    std::size_t tn(std::size_t k) const;
    std::size_t total() const;
};

struct AccuracyResult {
    double accuracy = 0.0;  // correct / total
    ConfusionCounts counts;
};

AccuracyResult accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

// The hyperparameter grid: C in {0.001,0.01,0.1,1,10}, gamma in
// {0.001,0.01,0.1,1}, kernel in {poly, linear, rbf}, in canonical order
// (C ascending, gamma ascending, kernel poly/linear/rbf).
std::vector<SvmConfig> default_svm_grid();

struct GridSearchEntry {
    SvmConfig config;
    double mean_cv_accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct GridSearchResult {
    SvmConfig best;
    std::vector<GridSearchEntry> table;
};

// Mean k-fold CV accuracy per candidate; ties keep the earliest candidate.
// A candidate whose training throws is marked failed, not fatal.
GridSearchResult grid_search(const std::vector<SvmConfig>& grid, const DataMatrix& x,
                             const std::vector<int>& labels, std::size_t num_classes, int k,
                             std::uint64_t seed);

struct ExperimentConfig {
    std::uint64_t seed = 0;
    SectionsMode sections_mode = SectionsMode::Offset324;
    std::size_t seq_len_sections = 1000;
    std::size_t seq_len_entire = 1000;
    std::size_t lstm_hidden = 64;
    std::size_t epochs = 10;
    std::size_t batch = 30;
    double val_frac = 0.2;
    double learning_rate = 1e-3;
    SvmConfig svm;                   // component SVMs (Table-style winners by default)
    SvmConfig fusion_svm;            // stacking classifier
    bool grid_search_svm = false;    // re-tune the component SVM config on header histograms
    bool grid_search_fusion = false; // re-tune the stacking SVM per combination
};

// Seed derivations shared by run_experiment and the CLI train/eval commands,
// so a model trained standalone is bit-identical to the same report cell.
std::uint64_t experiment_split_seed(std::uint64_t seed);
std::uint64_t baseline_cell_seed(std::uint64_t seed, ModelKind kind, Region region);

struct BaselineResult {
    RegionModel model;
    DataMatrix probs_all;  // probability rows for every sample in the dataset
    double test_accuracy = 0.0;
    TrainLog log;  // empty for SVM baselines
};

// Trains one (model kind, region) baseline on the dataset's train partition
// and evaluates it on the test partition. Tags must be set.
BaselineResult train_baseline(const Dataset& ds, ModelKind kind, Region region,
                              const ExperimentConfig& cfg);

struct ReportCell {
    std::string header_model;    // model kind, or the single model for baselines
    std::string sections_model;  // "none" for baselines
    std::string region;          // header / sections / entire / fusion
    double accuracy = 0.0;
    bool failed = false;
    std::string error;
};

struct ExperimentReport {
    std::vector<ReportCell> cells;  // 9 baselines then 9 fusion combinations
    std::string config_echo;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

// Trains the 3 models x 3 regions baselines and the nine fusion
// combinations on the dataset's train partition, evaluating everything on
// the test partition. A failing cell is recorded, not fatal. Fully seeded;
// identical (dataset, config) pairs give identical reports.
ExperimentReport run_experiment(Dataset& ds, const ExperimentConfig& cfg);

// Machine-readable rendering: one record per cell, fixed 4-decimal
// accuracies, no timing (byte-identical across identical runs).
std::string report_to_csv(const ExperimentReport& report);

// Human-readable table with the config echo and timing.
std::string report_to_text(const ExperimentReport& report);

}  // namespace pemux
