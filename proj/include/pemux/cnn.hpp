#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pemux/errors.hpp"
#include "pemux/features.hpp"
#include "pemux/matrix.hpp"
#include "pemux/ml_math.hpp"
#include "pemux/train_common.hpp"

namespace pemux {

// conv(3x3, valid, stride 1) -> ReLU -> maxpool(2x2, stride 2) -> flatten ->
// dense -> ReLU -> dense -> softmax. The 32x32 instantiation has layer
// shapes (30,30,32) -> (15,15,32) -> 7200 -> 128 -> 5.
struct CnnArch {
    std::size_t side = 32;
    std::size_t filters = 32;
    std::size_t dense1 = 128;
    std::size_t classes = 5;

    std::size_t conv_out() const { return side - 2; }
    std::size_t pool_out() const { return conv_out() / 2; }
    std::size_t flat_dim() const { return pool_out() * pool_out() * filters; }
};

inline CnnArch cnn_arch_header() { return CnnArch{16, 32, 128, 5}; }
inline CnnArch cnn_arch_full() { return CnnArch{32, 32, 128, 5}; }

// Per-layer trainable-parameter counts: [conv, pool, flatten, dense1, dense2].
std::vector<std::size_t> param_count(const CnnArch& arch);

struct CnnWeights {
    CnnArch arch;
    std::vector<double> flat;

    // flat layout: filters (F x 3 x 3) | filter biases (F) |
    //              W1 (dense1 x flat_dim) | b1 | W2 (classes x dense1) | b2
    std::size_t fb_off() const { return arch.filters * 9; }
    std::size_t w1_off() const { return fb_off() + arch.filters; }
    std::size_t b1_off() const { return w1_off() + arch.dense1 * arch.flat_dim(); }
    std::size_t w2_off() const { return b1_off() + arch.dense1; }
    std::size_t b2_off() const { return w2_off() + arch.classes * arch.dense1; }
    std::size_t total_params() const { return b2_off() + arch.classes; }
};

CnnWeights init_cnn_weights(const CnnArch& arch, std::uint64_t seed);

// pixels must hold side*side values. Throws SideMismatch otherwise.
ProbVector cnn_forward(std::span<const double> pixels, const CnnWeights& w);
ProbVector cnn_forward(const ByteImage& img, const CnnWeights& w);

// Post-ReLU, post-pool feature maps, laid out [filter][row][col]; exposed
// for inspection and for the pooling-shift tests.
std::vector<double> cnn_pooled_maps(std::span<const double> pixels, const CnnWeights& w);

// Loss of one sample with the analytic gradient accumulated into grad.
// Max-pool backward routes gradient only to the argmax position of each
// window (first position in row-major order on ties).
double cnn_loss_grad(std::span<const double> pixels, std::size_t label, const CnnWeights& w,
                     std::vector<double>& grad);

// Parallel kernel with sample-order reduction (bit-identical to the serial
// reference at any thread count); per-sample buffers are bounded by a wave
// size, which affects memory only.
double cnn_batch_gradient(const CnnWeights& w, const DataMatrix& images,
                          const std::vector<int>& labels, std::span<const std::size_t> rows,
                          std::vector<double>& grad_out);
double cnn_batch_gradient_serial(const CnnWeights& w, const DataMatrix& images,
                                 const std::vector<int>& labels, std::span<const std::size_t> rows,
                                 std::vector<double>& grad_out);

struct CnnTrainResult {
    CnnWeights weights;
    TrainLog log;
};

CnnTrainResult train_cnn(const DataMatrix& images, const std::vector<int>& labels,
                         const CnnArch& arch, const TrainOptions& opts);

DataMatrix cnn_predict_batch(const CnnWeights& w, const DataMatrix& images);

}  // namespace pemux
