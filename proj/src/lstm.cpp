#include "pemux/lstm.hpp"

#include <cmath>
#include <string>

#include "minibatch_train.hpp"
#include "pemux/rng.hpp"

namespace pemux {

namespace {

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Gate pre-activations for one step: z = W (h||x) + b, z has 4n entries.
void gate_preacts(const LstmWeights& w, const std::vector<double>& h, double x,
                  std::vector<double>& z) {
    const std::size_t n = w.cfg.hidden;
    const std::size_t in = w.concat_dim();
    const double* wp = w.flat.data();
    const double* bp = w.flat.data() + w.b_off();
    for (std::size_t r = 0; r < 4 * n; ++r) {
        const double* row = wp + r * in;
        double acc = bp[r];
        for (std::size_t c = 0; c < n; ++c) acc += row[c] * h[c];
        acc += row[n] * x;
        z[r] = acc;
    }
}

struct StepTrace {
    // Activated gate values [i f o g], tanh(c_t), h_t, c_t for each step.
    std::vector<double> gates;   // T x 4n
    std::vector<double> tanh_c;  // T x n
    std::vector<double> h;       // (T+1) x n, row 0 is the initial state
    std::vector<double> c;       // (T+1) x n
};

// Forward pass with full trace; returns the probability vector.
ProbVector forward_trace(std::span<const double> seq, const LstmWeights& w, StepTrace& tr) {
    const std::size_t n = w.cfg.hidden;
    const std::size_t t_len = seq.size();
    tr.gates.assign(t_len * 4 * n, 0.0);
    tr.tanh_c.assign(t_len * n, 0.0);
    tr.h.assign((t_len + 1) * n, 0.0);
    tr.c.assign((t_len + 1) * n, 0.0);

    std::vector<double> z(4 * n);
    std::vector<double> h_prev(n, 0.0);
    for (std::size_t t = 0; t < t_len; ++t) {
        gate_preacts(w, h_prev, seq[t], z);
        double* g_row = tr.gates.data() + t * 4 * n;
        for (std::size_t j = 0; j < n; ++j) {
            g_row[j] = sigmoid(z[j]);                       // i
            g_row[n + j] = sigmoid(z[n + j]);               // f
            g_row[2 * n + j] = sigmoid(z[2 * n + j]);       // o
            g_row[3 * n + j] = std::tanh(z[3 * n + j]);     // g
        }
        const double* c_prev = tr.c.data() + t * n;
        double* c_new = tr.c.data() + (t + 1) * n;
        double* h_new = tr.h.data() + (t + 1) * n;
        double* tc = tr.tanh_c.data() + t * n;
        for (std::size_t j = 0; j < n; ++j) {
            c_new[j] = g_row[n + j] * c_prev[j] + g_row[j] * g_row[3 * n + j];
            tc[j] = std::tanh(c_new[j]);
            h_new[j] = g_row[2 * n + j] * tc[j];
            h_prev[j] = h_new[j];
        }
        if (!std::isfinite(c_new[0]) || !std::isfinite(h_new[0]))
            throw Error(Errc::NonFiniteState, "lstm: state diverged at step " + std::to_string(t));
    }

    const double* u = w.flat.data() + w.u_off();
    const double* d = w.flat.data() + w.d_off();
    const double* h_final = tr.h.data() + t_len * n;
    std::vector<double> logits(w.cfg.classes);
    for (std::size_t k = 0; k < w.cfg.classes; ++k) {
        double acc = d[k];
        for (std::size_t j = 0; j < n; ++j) acc += u[k * n + j] * h_final[j];
        logits[k] = acc;
    }
    return softmax(logits);
}

}  // namespace

LstmWeights init_lstm_weights(const LstmConfig& cfg, std::uint64_t seed) {
    LstmWeights w;
    w.cfg = cfg;
    w.flat.assign(w.param_count(), 0.0);
    Rng rng(seed);

    const std::size_t n = cfg.hidden;
    const std::size_t in = w.concat_dim();
    const double w_limit = std::sqrt(6.0 / static_cast<double>(in + n));
    for (std::size_t i = 0; i < w.w_size(); ++i) w.flat[i] = rng.uniform(-w_limit, w_limit);

    // Biases zero except the forget block, initialized to 1 (retention prior).
    for (std::size_t j = 0; j < n; ++j) w.flat[w.b_off() + n + j] = 1.0;

    const double u_limit = std::sqrt(6.0 / static_cast<double>(n + cfg.classes));
    for (std::size_t i = 0; i < cfg.classes * n; ++i)
        w.flat[w.u_off() + i] = rng.uniform(-u_limit, u_limit);
    return w;
}

LstmGates lstm_cell(double x_t, LstmState& state, const LstmWeights& w) {
    const std::size_t n = w.cfg.hidden;
    if (state.h.size() != n || state.c.size() != n)
        throw Error(Errc::LengthMismatch, "lstm_cell: state vectors must have length n");

    std::vector<double> z(4 * n);
    gate_preacts(w, state.h, x_t, z);

    LstmGates gates;
    gates.input.resize(n);
    gates.forget.resize(n);
    gates.output.resize(n);
    gates.gate.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        gates.input[j] = sigmoid(z[j]);
        gates.forget[j] = sigmoid(z[n + j]);
        gates.output[j] = sigmoid(z[2 * n + j]);
        gates.gate[j] = std::tanh(z[3 * n + j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double c_new = gates.forget[j] * state.c[j] + gates.input[j] * gates.gate[j];
        if (!std::isfinite(c_new))
            throw Error(Errc::NonFiniteState, "lstm_cell: non-finite cell state");
        state.c[j] = c_new;
        state.h[j] = gates.output[j] * std::tanh(c_new);
    }
    return gates;
}

ProbVector lstm_forward(std::span<const double> seq, const LstmWeights& w) {
    if (seq.size() != w.cfg.seq_len)
        throw Error(Errc::LengthMismatch, "lstm_forward: sequence length " +
                                              std::to_string(seq.size()) + ", expected " +
                                              std::to_string(w.cfg.seq_len));
    StepTrace tr;
    return forward_trace(seq, w, tr);
}

double lstm_loss_grad(std::span<const double> seq, std::size_t label, const LstmWeights& w,
                      std::vector<double>& grad) {
    if (seq.size() != w.cfg.seq_len)
        throw Error(Errc::LengthMismatch, "lstm_loss_grad: bad sequence length");
    const std::size_t n = w.cfg.hidden;
    const std::size_t in = w.concat_dim();
    const std::size_t t_len = seq.size();
    const std::size_t classes = w.cfg.classes;

    StepTrace tr;
    const ProbVector probs = forward_trace(seq, w, tr);
    const double loss = cross_entropy(probs, label);

    const double* u = w.flat.data() + w.u_off();
    double* g_w = grad.data();
    double* g_b = grad.data() + w.b_off();
    double* g_u = grad.data() + w.u_off();
    double* g_d = grad.data() + w.d_off();

    // Output layer: dlogits = p - onehot(y).
    const double* h_final = tr.h.data() + t_len * n;
    std::vector<double> dh(n, 0.0);
    for (std::size_t k = 0; k < classes; ++k) {
        const double dlogit = probs[k] - (k == label ? 1.0 : 0.0);
        g_d[k] += dlogit;
        for (std::size_t j = 0; j < n; ++j) {
            g_u[k * n + j] += dlogit * h_final[j];
            dh[j] += u[k * n + j] * dlogit;
        }
    }

    std::vector<double> dc(n, 0.0);
    std::vector<double> dz(4 * n);
    for (std::size_t t = t_len; t-- > 0;) {
        const double* g_row = tr.gates.data() + t * 4 * n;
        const double* tc = tr.tanh_c.data() + t * n;
        const double* c_prev = tr.c.data() + t * n;
        const double* h_prev = tr.h.data() + t * n;

        for (std::size_t j = 0; j < n; ++j) {
            const double gi = g_row[j], gf = g_row[n + j], go = g_row[2 * n + j],
                         gg = g_row[3 * n + j];
            const double d_o = dh[j] * tc[j];
            const double dcj = dc[j] + dh[j] * go * (1.0 - tc[j] * tc[j]);
            const double d_i = dcj * gg;
            const double d_g = dcj * gi;
            const double d_f = dcj * c_prev[j];
            dz[j] = d_i * gi * (1.0 - gi);
            dz[n + j] = d_f * gf * (1.0 - gf);
            dz[2 * n + j] = d_o * go * (1.0 - go);
            dz[3 * n + j] = d_g * (1.0 - gg * gg);
            dc[j] = dcj * gf;  // flows to c_{t-1}
        }

        const double x_t = seq[t];
        const double* wp = w.flat.data();
        for (std::size_t j = 0; j < n; ++j) dh[j] = 0.0;
        for (std::size_t r = 0; r < 4 * n; ++r) {
            const double dzr = dz[r];
            double* g_wrow = g_w + r * in;
            const double* w_row = wp + r * in;
            for (std::size_t c = 0; c < n; ++c) {
                g_wrow[c] += dzr * h_prev[c];
                dh[c] += w_row[c] * dzr;
            }
            g_wrow[n] += dzr * x_t;
            g_b[r] += dzr;
        }
    }
    return loss;
}

namespace {

double batch_gradient_impl(const LstmWeights& w, const DataMatrix& seqs,
                           const std::vector<int>& labels, std::span<const std::size_t> rows,
                           std::vector<double>& grad_out, bool parallel) {
    const std::size_t b = rows.size();
    grad_out.assign(w.param_count(), 0.0);
    std::vector<std::vector<double>> sample_grads(b);
    std::vector<double> losses(b, 0.0);

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (long long s = 0; s < static_cast<long long>(b); ++s) {
        const std::size_t row = rows[static_cast<std::size_t>(s)];
        auto& g = sample_grads[static_cast<std::size_t>(s)];
        g.assign(w.param_count(), 0.0);
        losses[static_cast<std::size_t>(s)] =
            lstm_loss_grad(seqs.row(row), static_cast<std::size_t>(labels[row]), w, g);
    }

    // Reduce in sample order; grouping never depends on the thread count.
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(b);
    for (std::size_t s = 0; s < b; ++s) {
        loss += losses[s];
        const auto& g = sample_grads[s];
        for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += g[i] * inv;
    }
    return loss * inv;
}

}  // namespace

double lstm_batch_gradient(const LstmWeights& w, const DataMatrix& seqs,
                           const std::vector<int>& labels, std::span<const std::size_t> rows,
                           std::vector<double>& grad_out) {
    return batch_gradient_impl(w, seqs, labels, rows, grad_out, true);
}

double lstm_batch_gradient_serial(const LstmWeights& w, const DataMatrix& seqs,
                                  const std::vector<int>& labels,
                                  std::span<const std::size_t> rows,
                                  std::vector<double>& grad_out) {
    return batch_gradient_impl(w, seqs, labels, rows, grad_out, false);
}

LstmTrainResult train_lstm(const DataMatrix& seqs, const std::vector<int>& labels,
                           const LstmConfig& cfg, const TrainOptions& opts) {
    if (seqs.cols != cfg.seq_len)
        throw Error(Errc::LengthMismatch, "train_lstm: dataset columns != seq_len");

    LstmTrainResult out;
    out.weights = init_lstm_weights(cfg, derive_seed(opts.seed, 0));
    out.log = detail::minibatch_train(
        out.weights.flat, seqs.rows, labels, opts, "train_lstm",
        [&](std::span<const std::size_t> rows, std::vector<double>& grad) {
            return lstm_batch_gradient(out.weights, seqs, labels, rows, grad);
        },
        [&](std::size_t row) { return lstm_forward(seqs.row(row), out.weights); });
    return out;
}

DataMatrix lstm_predict_batch(const LstmWeights& w, const DataMatrix& seqs) {
    DataMatrix out(seqs.rows, w.cfg.classes);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(seqs.rows); ++i) {
        const ProbVector p = lstm_forward(seqs.row(static_cast<std::size_t>(i)), w);
        std::copy(p.begin(), p.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

}  // namespace pemux
