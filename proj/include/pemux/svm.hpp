#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pemux/errors.hpp"
#include "pemux/matrix.hpp"
#include "pemux/ml_math.hpp"

namespace pemux {

// Order matters: this is the canonical tie-break order used by grid search.
enum class KernelKind : std::uint8_t { Poly = 0, Linear = 1, Rbf = 2 };

const char* kernel_name(KernelKind k) noexcept;

struct SvmConfig {
    KernelKind kernel = KernelKind::Rbf;
    double C = 10.0;
    double gamma = 0.01;
    // Poly is fixed at degree 3 with coefficient 1: (gamma x.y + 1)^3.
};

// One soft-margin machine trained by SMO, plus its sigmoid calibration.
// Probability of the positive class is 1 / (1 + exp(A f + B)).
struct BinarySvm {
    SvmConfig config;
    DataMatrix support_vectors;
    std::vector<double> coeffs;  // alpha_i * y_i per support vector
    double bias = 0.0;
    double platt_a = -1.0;
    double platt_b = 0.0;
};

struct SvmModel {
    std::size_t num_classes = 0;
    std::vector<BinarySvm> machines;  // one-vs-rest, machine k: class k is +1
};

double kernel_eval(const SvmConfig& cfg, std::span<const double> x, std::span<const double> y);

// Full Gram matrix; the OpenMP kernel and its serial reference twin produce
// bit-identical output (each entry is computed by exactly one thread).
DataMatrix gram_matrix(const DataMatrix& x, const SvmConfig& cfg);
DataMatrix gram_matrix_serial(const DataMatrix& x, const SvmConfig& cfg);

struct SmoResult {
    BinarySvm machine;
    std::vector<double> alphas;        // per training sample, 0 <= alpha <= C
    std::vector<double> train_scores;  // decision values on the training set
    double dual_objective = 0.0;
    std::size_t passes = 0;
    bool converged = false;
};

// Sequential minimal optimization on the soft-margin dual. Iterates until no
// KKT violation exceeds kKktTol or kMaxPasses sweeps have run. Pair
// selection: the worst violator first, paired by max |E_i - E_j|, with
// deterministic lowest-index tie-breaks and fallback scans.
inline constexpr double kKktTol = 1e-3;
inline constexpr std::size_t kMaxPasses = 10000;

SmoResult train_binary_smo(const DataMatrix& x, const std::vector<int>& labels,
                           const SvmConfig& cfg);

// Variant reusing a precomputed Gram matrix over x's rows.
SmoResult train_binary_smo_gram(const DataMatrix& x, const DataMatrix& gram,
                                const std::vector<int>& labels, const SvmConfig& cfg);

// Sigmoid calibration (regularized-target Newton fit, at most 100 damped
// iterations). labels are +/-1. Throws DegenerateScores when every score is
// identical, SingleClassInput when a class is missing.
std::pair<double, double> fit_platt(const std::vector<double>& scores,
                                    const std::vector<int>& labels);

// One-vs-rest with per-machine Platt calibration; falls back to the default
// sigmoid when calibration is degenerate (e.g. one sample per class).
// Machines for distinct classes train concurrently over a shared Gram.
SvmModel train_multiclass(const DataMatrix& x, const std::vector<int>& labels,
                          std::size_t num_classes, const SvmConfig& cfg);

double decision_function(const BinarySvm& machine, std::span<const double> x);

// Per-class calibrated sigmoids, renormalized to sum to 1.
ProbVector predict_proba(const SvmModel& model, std::span<const double> x);

std::size_t predict_class(const SvmModel& model, std::span<const double> x);

// Rows of probabilities for a whole dataset; parallel across samples.
DataMatrix predict_proba_batch(const SvmModel& model, const DataMatrix& x);

// Regenerates the dual objective value of a trained machine from its
// support vectors: sum(alpha) - 1/2 sum_ij coeff_i coeff_j K_ij.
double dual_objective(const BinarySvm& machine);

// Largest KKT violation of a trained machine over its training set,
// recomputed from scratch (not from the solver's error cache).
double max_kkt_violation(const DataMatrix& x, const std::vector<int>& labels,
                         const SmoResult& result);

}  // namespace pemux
