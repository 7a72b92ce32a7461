#include "pemux/svm.hpp"

#include <algorithm>
#include <cmath>

namespace pemux {

const char* kernel_name(KernelKind k) noexcept {
    switch (k) {
        case KernelKind::Poly: return "poly";
        case KernelKind::Linear: return "linear";
        case KernelKind::Rbf: return "rbf";
    }
    return "?";
}

double kernel_eval(const SvmConfig& cfg, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size())
        throw Error(Errc::DimensionMismatch, "kernel_eval: vectors of length " +
                                                 std::to_string(x.size()) + " and " +
                                                 std::to_string(y.size()));
    switch (cfg.kernel) {
        case KernelKind::Linear: {
            double dot = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
            return dot;
        }
        case KernelKind::Poly: {
            double dot = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
            const double base = cfg.gamma * dot + 1.0;
            return base * base * base;
        }
        case KernelKind::Rbf: {
            double d2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = x[i] - y[i];
                d2 += d * d;
            }
            return std::exp(-cfg.gamma * d2);
        }
    }
    return 0.0;
}

namespace {

DataMatrix gram_impl(const DataMatrix& x, const SvmConfig& cfg, bool parallel) {
    const std::size_t n = x.rows;
    DataMatrix gram(n, n);
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        const auto xi = x.row(static_cast<std::size_t>(i));
        for (std::size_t j = static_cast<std::size_t>(i); j < n; ++j) {
            const double k = kernel_eval(cfg, xi, x.row(j));
            gram.data[static_cast<std::size_t>(i) * n + j] = k;
            gram.data[j * n + static_cast<std::size_t>(i)] = k;
        }
    }
    return gram;
}

}  // namespace

DataMatrix gram_matrix(const DataMatrix& x, const SvmConfig& cfg) { return gram_impl(x, cfg, true); }

DataMatrix gram_matrix_serial(const DataMatrix& x, const SvmConfig& cfg) {
    return gram_impl(x, cfg, false);
}

namespace {

// State of one SMO run over a fixed Gram matrix.
struct Smo {
    const DataMatrix& gram;
    const std::vector<int>& y;
    double C;
    std::vector<double> alphas;
    std::vector<double> errors;  // E_i = f(x_i) - y_i
    double b = 0.0;

    Smo(const DataMatrix& g, const std::vector<int>& labels, double c)
        : gram(g), y(labels), C(c), alphas(labels.size(), 0.0), errors(labels.size()) {
        for (std::size_t i = 0; i < y.size(); ++i) errors[i] = -static_cast<double>(y[i]);
    }

    double k(std::size_t i, std::size_t j) const { return gram.data[i * gram.cols + j]; }

    // Magnitude of the KKT violation at i, zero when satisfied within tol.
    double violation(std::size_t i) const {
        const double r = errors[i] * y[i];
        if (alphas[i] < C && r < -kKktTol) return -r;
        if (alphas[i] > 0.0 && r > kKktTol) return r;
        return 0.0;
    }

    bool take_step(std::size_t i1, std::size_t i2) {
        if (i1 == i2) return false;
        const double a1 = alphas[i1], a2 = alphas[i2];
        const int y1 = y[i1], y2 = y[i2];
        const double e1 = errors[i1], e2 = errors[i2];
        const double s = static_cast<double>(y1 * y2);

        double lo, hi;
        if (y1 != y2) {
            lo = std::max(0.0, a2 - a1);
            hi = std::min(C, C + a2 - a1);
        } else {
            lo = std::max(0.0, a1 + a2 - C);
            hi = std::min(C, a1 + a2);
        }
        if (hi - lo < 1e-12) return false;

        const double k11 = k(i1, i1), k22 = k(i2, i2), k12 = k(i1, i2);
        const double eta = k11 + k22 - 2.0 * k12;

        double a2new;
        if (eta > 1e-12) {
            a2new = a2 + y2 * (e1 - e2) / eta;
            a2new = std::clamp(a2new, lo, hi);
        } else {
            // Flat direction: evaluate the objective at both bounds.
            const double f1 = y1 * e1 - a1 * k11 - s * a2 * k12;
            const double f2 = y2 * e2 - a2 * k22 - s * a1 * k12;
            const double l1 = a1 + s * (a2 - lo);
            const double h1 = a1 + s * (a2 - hi);
            const double obj_lo =
                l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 + s * lo * l1 * k12;
            const double obj_hi =
                h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 + s * hi * h1 * k12;
            if (obj_lo < obj_hi - 1e-12)
                a2new = lo;
            else if (obj_hi < obj_lo - 1e-12)
                a2new = hi;
            else
                return false;
        }

        if (std::abs(a2new - a2) < 1e-10 * (a2new + a2 + 1e-10)) return false;

        double a1new = a1 + s * (a2 - a2new);
        double a2adj = a2new;
        if (a1new < 0.0) {
            a2adj += s * a1new;
            a1new = 0.0;
        } else if (a1new > C) {
            a2adj += s * (a1new - C);
            a1new = C;
        }

        const double d1 = y1 * (a1new - a1);
        const double d2 = y2 * (a2adj - a2);
        const double b1 = b - e1 - d1 * k11 - d2 * k12;
        const double b2 = b - e2 - d1 * k12 - d2 * k22;
        double bnew;
        if (a1new > 0.0 && a1new < C)
            bnew = b1;
        else if (a2adj > 0.0 && a2adj < C)
            bnew = b2;
        else
            bnew = 0.5 * (b1 + b2);

        const std::size_t n = y.size();
        for (std::size_t i = 0; i < n; ++i)
            errors[i] += d1 * k(i1, i) + d2 * k(i2, i) + (bnew - b);
        alphas[i1] = a1new;
        alphas[i2] = a2adj;
        b = bnew;
        return true;
    }

    // Second-choice heuristic, then deterministic fallback scans.
    bool examine(std::size_t i1) {
        const std::size_t n = y.size();
        std::size_t best = n;
        double best_gap = -1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i1) continue;
            const double gap = std::abs(errors[i1] - errors[j]);
            if (gap > best_gap) {
                best_gap = gap;
                best = j;
            }
        }
        if (best < n && take_step(i1, best)) return true;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i1 || j == best) continue;
            if (alphas[j] > 0.0 && alphas[j] < C && take_step(i1, j)) return true;
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i1 || j == best) continue;
            if (take_step(i1, j)) return true;
        }
        return false;
    }
};

}  // namespace

SmoResult train_binary_smo_gram(const DataMatrix& x, const DataMatrix& gram,
                                const std::vector<int>& labels, const SvmConfig& cfg) {
    const std::size_t n = labels.size();
    bool has_pos = false, has_neg = false;
    for (int l : labels) {
        if (l == 1) has_pos = true;
        else if (l == -1) has_neg = true;
        else throw Error(Errc::DimensionMismatch, "train_binary_smo: labels must be +/-1");
    }
    if (!has_pos || !has_neg)
        throw Error(Errc::SingleClassInput, "train_binary_smo: both classes must be present");

    Smo smo(gram, labels, cfg.C);

    std::size_t passes = 0;
    bool converged = false;
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(n);
    while (passes < kMaxPasses) {
        order.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const double v = smo.violation(i);
            if (v > kKktTol) order.emplace_back(-v, i);  // negated: sort ascending = worst first
        }
        if (order.empty()) {
            converged = true;
            break;
        }
        std::sort(order.begin(), order.end());
        bool made_step = false;
        for (const auto& [neg_v, i1] : order) {
            if (smo.violation(i1) <= kKktTol) continue;  // fixed by an earlier step this pass
            if (smo.examine(i1)) made_step = true;
        }
        ++passes;
        if (!made_step) break;  // residual violators exist but no pair can move
    }

    SmoResult result;
    result.passes = passes;
    result.converged = converged;
    result.alphas = smo.alphas;

    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (smo.alphas[i] == 0.0) continue;
        obj += smo.alphas[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (smo.alphas[j] == 0.0) continue;
            obj -= 0.5 * smo.alphas[i] * smo.alphas[j] * labels[i] * labels[j] * smo.k(i, j);
        }
    }
    result.dual_objective = obj;

    // Refit the threshold from the final alphas. The incrementally
    // maintained b can drift outside the optimal interval when every
    // support vector ends up at a bound.
    std::vector<double> g(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (smo.alphas[j] == 0.0) continue;
        const double coeff = smo.alphas[j] * labels[j];
        for (std::size_t i = 0; i < n; ++i) g[i] += coeff * smo.k(j, i);
    }
    double b_sum = 0.0;
    std::size_t b_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (smo.alphas[i] > 0.0 && smo.alphas[i] < cfg.C) {
            b_sum += labels[i] - g[i];
            ++b_count;
        }
    }
    if (b_count > 0) {
        smo.b = b_sum / static_cast<double>(b_count);
    } else {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const bool at_zero = smo.alphas[i] == 0.0;
            if ((labels[i] > 0) == at_zero)
                lo = std::max(lo, at_zero ? 1.0 - g[i] : -1.0 - g[i]);
            else
                hi = std::min(hi, at_zero ? -1.0 - g[i] : 1.0 - g[i]);
        }
        if (std::isfinite(lo) && std::isfinite(hi))
            smo.b = 0.5 * (lo + hi);
        else if (std::isfinite(lo))
            smo.b = lo;
        else if (std::isfinite(hi))
            smo.b = hi;
    }

    result.train_scores.resize(n);
    for (std::size_t i = 0; i < n; ++i) result.train_scores[i] = g[i] + smo.b;

    BinarySvm& m = result.machine;
    m.config = cfg;
    m.bias = smo.b;
    m.support_vectors.cols = x.cols;
    for (std::size_t i = 0; i < n; ++i) {
        if (smo.alphas[i] > 0.0) {
            m.support_vectors.push_row(x.row(i));
            m.coeffs.push_back(smo.alphas[i] * labels[i]);
        }
    }
    return result;
}

SmoResult train_binary_smo(const DataMatrix& x, const std::vector<int>& labels,
                           const SvmConfig& cfg) {
    return train_binary_smo_gram(x, gram_matrix(x, cfg), labels, cfg);
}

std::pair<double, double> fit_platt(const std::vector<double>& scores,
                                    const std::vector<int>& labels) {
    const std::size_t n = scores.size();
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l > 0 ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw Error(Errc::SingleClassInput, "fit_platt: both classes must be present");

    const auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    if (*mx - *mn == 0.0)
        throw Error(Errc::DegenerateScores, "fit_platt: all decision scores identical");

    // Regularized targets.
    const double hi = (static_cast<double>(n_pos) + 1.0) / (static_cast<double>(n_pos) + 2.0);
    const double lo = 1.0 / (static_cast<double>(n_neg) + 2.0);
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = labels[i] > 0 ? hi : lo;

    double a = 0.0;
    double b = std::log((static_cast<double>(n_neg) + 1.0) / (static_cast<double>(n_pos) + 1.0));

    auto objective = [&](double pa, double pb) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = scores[i] * pa + pb;
            if (z >= 0.0)
                f += target[i] * z + std::log1p(std::exp(-z));
            else
                f += (target[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    double fval = objective(a, b);
    const double sigma = 1e-12;
    for (int it = 0; it < 100; ++it) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = scores[i] * a + b;
            double p, q;
            if (z >= 0.0) {
                q = 1.0 / (1.0 + std::exp(-z));
                p = 1.0 - q;  // p = P(+1), since P = 1/(1+exp(z))
            } else {
                p = 1.0 / (1.0 + std::exp(z));
                q = 1.0 - p;
            }
            const double d1 = target[i] - p;
            const double d2 = p * q;
            g1 += scores[i] * d1;
            g2 += d1;
            h11 += scores[i] * scores[i] * d2;
            h22 += d2;
            h21 += scores[i] * d2;
        }
        if (std::abs(g1) < 1e-10 && std::abs(g2) < 1e-10) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;

        double step = 1.0;
        bool moved = false;
        while (step >= 1e-10) {
            const double na = a + step * da;
            const double nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) break;
    }
    return {a, b};
}

double decision_function(const BinarySvm& machine, std::span<const double> x) {
    double f = machine.bias;
    for (std::size_t i = 0; i < machine.support_vectors.rows; ++i)
        f += machine.coeffs[i] * kernel_eval(machine.config, machine.support_vectors.row(i), x);
    return f;
}

SvmModel train_multiclass(const DataMatrix& x, const std::vector<int>& labels,
                          std::size_t num_classes, const SvmConfig& cfg) {
    if (num_classes < 2) throw Error(Errc::MissingClass, "train_multiclass: need at least 2 classes");
    std::vector<std::size_t> counts(num_classes, 0);
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes)
            throw Error(Errc::LabelOutOfRange, "train_multiclass: label out of range");
        ++counts[static_cast<std::size_t>(l)];
    }
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (counts[k] == 0)
            throw Error(Errc::MissingClass,
                        "train_multiclass: class " + std::to_string(k) + " has no samples");
    }

    const DataMatrix gram = gram_matrix(x, cfg);

    SvmModel model;
    model.num_classes = num_classes;
    model.machines.resize(num_classes);

#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < static_cast<long long>(num_classes); ++k) {
        std::vector<int> ovr(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            ovr[i] = labels[i] == static_cast<int>(k) ? 1 : -1;
        SmoResult res = train_binary_smo_gram(x, gram, ovr, cfg);
        try {
            auto [a, b] = fit_platt(res.train_scores, ovr);
            res.machine.platt_a = a;
            res.machine.platt_b = b;
        } catch (const Error& e) {
            if (e.code() != Errc::DegenerateScores) throw;
            // Degenerate calibration data: keep the default monotone sigmoid.
        }
        model.machines[static_cast<std::size_t>(k)] = std::move(res.machine);
    }
    return model;
}

ProbVector predict_proba(const SvmModel& model, std::span<const double> x) {
    ProbVector p(model.num_classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < model.num_classes; ++k) {
        const BinarySvm& m = model.machines[k];
        const double f = decision_function(m, x);
        const double z = m.platt_a * f + m.platt_b;
        const double pk = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
        p[k] = pk;
        sum += pk;
    }
    if (sum < 1e-15) {
        for (double& v : p) v = 1.0 / static_cast<double>(model.num_classes);
    } else {
        for (double& v : p) v /= sum;
    }
    return p;
}

std::size_t predict_class(const SvmModel& model, std::span<const double> x) {
    const ProbVector p = predict_proba(model, x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

DataMatrix predict_proba_batch(const SvmModel& model, const DataMatrix& x) {
    DataMatrix out(x.rows, model.num_classes);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < static_cast<long long>(x.rows); ++i) {
        const ProbVector p = predict_proba(model, x.row(static_cast<std::size_t>(i)));
        std::copy(p.begin(), p.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

double dual_objective(const BinarySvm& machine) {
    double obj = 0.0;
    const std::size_t n = machine.support_vectors.rows;
    for (std::size_t i = 0; i < n; ++i) {
        obj += std::abs(machine.coeffs[i]);
        for (std::size_t j = 0; j < n; ++j) {
            obj -= 0.5 * machine.coeffs[i] * machine.coeffs[j] *
                   kernel_eval(machine.config, machine.support_vectors.row(i),
                               machine.support_vectors.row(j));
        }
    }
    return obj;
}

double max_kkt_violation(const DataMatrix& x, const std::vector<int>& labels,
                         const SmoResult& result) {
    const BinarySvm& machine = result.machine;
    const double c = machine.config.C;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double alpha = result.alphas[i];
        const double margin = labels[i] * decision_function(machine, x.row(i));
        double v;
        if (alpha <= 0.0) {
            v = std::max(0.0, 1.0 - margin);
        } else if (alpha >= c) {
            v = std::max(0.0, margin - 1.0);
        } else {
            v = std::abs(margin - 1.0);
        }
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace pemux
