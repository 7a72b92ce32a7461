#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "pemux/errors.hpp"

namespace pemux {

// Class-probability vector: nonnegative entries summing to 1.
using ProbVector = std::vector<double>;

bool is_prob_vector(const ProbVector& p, double tol = 1e-6);

// Numerically stable softmax (max-subtracted). Throws NonFiniteInput.
ProbVector softmax(const std::vector<double>& logits);

// -log(p[label] + 1e-12). The floor keeps the loss finite when a probability
// collapses to zero. Throws LabelOutOfRange.
double cross_entropy(const ProbVector& p, std::size_t label);

std::vector<double> one_hot(std::size_t label, std::size_t num_classes);

// Bias-corrected Adam. One state per training run; not shared across runs.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n_params, double learning_rate = 1e-3)
        : m(n_params, 0.0), v(n_params, 0.0), lr(learning_rate) {}
};

// In-place update of params. Throws ShapeMismatch when sizes disagree.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state);

// Central-difference gradient estimate, (f(x+eps e_i) - f(x-eps e_i)) / 2eps.
// This is the independent oracle the hand-derived backward passes are
// checked against; it only ever calls the supplied loss function.
std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& loss_fn,
                                     const std::vector<double>& params, double epsilon = 1e-4);

// ||a - b|| / max(||a||, ||b||, floor); the metric used by gradient checks.
double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor = 1e-300);

}  // namespace pemux
