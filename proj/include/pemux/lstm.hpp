#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pemux/errors.hpp"
#include "pemux/matrix.hpp"
#include "pemux/ml_math.hpp"
#include "pemux/train_common.hpp"

namespace pemux {

// Single-layer LSTM over scalar byte inputs. Each timestep consumes one
// scaled byte, so the recurrence matrix W is 4n x (n+1): it multiplies the
// concatenation (h_{t-1} || x_t). Rows are stacked gate blocks in the order
// [input; forget; output; gate].
struct LstmConfig {
    std::size_t hidden = 64;
    std::size_t classes = 5;
    std::size_t seq_len = 324;
};

struct LstmWeights {
    LstmConfig cfg;
    std::vector<double> flat;

    std::size_t concat_dim() const { return cfg.hidden + 1; }
    std::size_t w_size() const { return 4 * cfg.hidden * concat_dim(); }
    // flat layout: W | b (4n, gate-block order) | U (classes x n) | d (classes)
    std::size_t b_off() const { return w_size(); }
    std::size_t u_off() const { return b_off() + 4 * cfg.hidden; }
    std::size_t d_off() const { return u_off() + cfg.classes * cfg.hidden; }
    std::size_t param_count() const { return d_off() + cfg.classes; }
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;

    explicit LstmState(std::size_t n) : h(n, 0.0), c(n, 0.0) {}
};

struct LstmGates {
    std::vector<double> input;
    std::vector<double> forget;
    std::vector<double> output;
    std::vector<double> gate;
};

// Glorot-uniform blocks; the forget-gate bias starts at 1.0.
LstmWeights init_lstm_weights(const LstmConfig& cfg, std::uint64_t seed);

// One timestep: gates from sigma/tanh of W (h||x) + b, then
// c_t = f*c_{t-1} + i*g and h_t = o * tanh(c_t), all elementwise.
// Throws NonFiniteState if the new state is not finite.
LstmGates lstm_cell(double x_t, LstmState& state, const LstmWeights& w);

// Softmax over the dense layer applied to the final hidden state.
// Throws LengthMismatch unless seq length equals cfg.seq_len.
ProbVector lstm_forward(std::span<const double> seq, const LstmWeights& w);

// Cross-entropy loss of one sample; accumulates the analytic BPTT gradient
// into grad (same layout/size as w.flat).
double lstm_loss_grad(std::span<const double> seq, std::size_t label, const LstmWeights& w,
                      std::vector<double>& grad);

// Mean loss and mean gradient over the chosen rows. The parallel kernel
// computes per-sample gradients concurrently, then reduces them in sample
// order, so it is bit-identical to the serial reference at any thread count.
double lstm_batch_gradient(const LstmWeights& w, const DataMatrix& seqs,
                           const std::vector<int>& labels, std::span<const std::size_t> rows,
                           std::vector<double>& grad_out);
double lstm_batch_gradient_serial(const LstmWeights& w, const DataMatrix& seqs,
                                  const std::vector<int>& labels,
                                  std::span<const std::size_t> rows, std::vector<double>& grad_out);

struct LstmTrainResult {
    LstmWeights weights;
    TrainLog log;
};

// Minibatch Adam on mean cross-entropy with a held-out validation split.
// Divergence aborts with NonFiniteState naming the epoch and batch.
LstmTrainResult train_lstm(const DataMatrix& seqs, const std::vector<int>& labels,
                           const LstmConfig& cfg, const TrainOptions& opts);

// Probability rows for a whole dataset; parallel across samples.
DataMatrix lstm_predict_batch(const LstmWeights& w, const DataMatrix& seqs);

}  // namespace pemux
