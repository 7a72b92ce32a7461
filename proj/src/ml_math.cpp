#include "pemux/ml_math.hpp"

#include <algorithm>
#include <cmath>

namespace pemux {

bool is_prob_vector(const ProbVector& p, double tol) {
    double sum = 0.0;
    for (double x : p) {
        if (!(x >= 0.0) || x > 1.0 + tol) return false;
        sum += x;
    }
    return std::abs(sum - 1.0) <= tol;
}

ProbVector softmax(const std::vector<double>& logits) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (double x : logits) {
        if (!std::isfinite(x)) throw Error(Errc::NonFiniteInput, "softmax: non-finite logit");
        max_logit = std::max(max_logit, x);
    }
    ProbVector out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - max_logit);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

double cross_entropy(const ProbVector& p, std::size_t label) {
    if (label >= p.size())
        throw Error(Errc::LabelOutOfRange,
                    "cross_entropy: label " + std::to_string(label) + " for " +
                        std::to_string(p.size()) + " classes");
    return -std::log(p[label] + 1e-12);
}

std::vector<double> one_hot(std::size_t label, std::size_t num_classes) {
    if (label >= num_classes)
        throw Error(Errc::LabelOutOfRange, "one_hot: label out of range");
    std::vector<double> v(num_classes, 0.0);
    v[label] = 1.0;
    return v;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw Error(Errc::ShapeMismatch, "adam_step: parameter/gradient/state sizes disagree");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& loss_fn,
                                     const std::vector<double>& params, double epsilon) {
    std::vector<double> grad(params.size());
    std::vector<double> probe = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + epsilon;
        const double plus = loss_fn(probe);
        probe[i] = saved - epsilon;
        const double minus = loss_fn(probe);
        probe[i] = saved;
        grad[i] = (plus - minus) / (2.0 * epsilon);
    }
    return grad;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nb), floor});
    return std::sqrt(diff) / denom;
}

}  // namespace pemux
