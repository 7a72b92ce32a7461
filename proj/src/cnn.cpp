#include "pemux/cnn.hpp"

#include <algorithm>
#include <cmath>

#include "minibatch_train.hpp"
#include "pemux/parallel.hpp"
#include "pemux/rng.hpp"

namespace pemux {

std::vector<std::size_t> param_count(const CnnArch& arch) {
    const std::size_t conv = arch.filters * (3 * 3 * 1 + 1);
    const std::size_t dense1 = arch.flat_dim() * arch.dense1 + arch.dense1;
    const std::size_t dense2 = arch.dense1 * arch.classes + arch.classes;
    return {conv, 0, 0, dense1, dense2};
}

CnnWeights init_cnn_weights(const CnnArch& arch, std::uint64_t seed) {
    CnnWeights w;
    w.arch = arch;
    w.flat.assign(w.total_params(), 0.0);
    Rng rng(seed);

    const double f_limit = std::sqrt(6.0 / static_cast<double>(9 + arch.filters));
    for (std::size_t i = 0; i < arch.filters * 9; ++i) w.flat[i] = rng.uniform(-f_limit, f_limit);

    const double w1_limit = std::sqrt(6.0 / static_cast<double>(arch.flat_dim() + arch.dense1));
    for (std::size_t i = 0; i < arch.dense1 * arch.flat_dim(); ++i)
        w.flat[w.w1_off() + i] = rng.uniform(-w1_limit, w1_limit);

    const double w2_limit = std::sqrt(6.0 / static_cast<double>(arch.dense1 + arch.classes));
    for (std::size_t i = 0; i < arch.classes * arch.dense1; ++i)
        w.flat[w.w2_off() + i] = rng.uniform(-w2_limit, w2_limit);
    return w;
}

namespace {

struct CnnTrace {
    std::vector<double> conv_pre;     // F x co x co
    std::vector<double> pooled;       // flat_dim, post-ReLU post-pool
    std::vector<std::size_t> argmax;  // flat_dim, index into conv_pre
    std::vector<double> d1_pre;       // dense1
    std::vector<double> a1;           // dense1
};

ProbVector forward_impl(std::span<const double> px, const CnnWeights& w, CnnTrace& tr) {
    const CnnArch& a = w.arch;
    if (px.size() != a.side * a.side)
        throw Error(Errc::SideMismatch, "cnn_forward: expected " + std::to_string(a.side) + "x" +
                                            std::to_string(a.side) + " image, got " +
                                            std::to_string(px.size()) + " pixels");
    const std::size_t s = a.side, co = a.conv_out(), po = a.pool_out();
    const double* filt = w.flat.data();
    const double* fb = w.flat.data() + w.fb_off();

    tr.conv_pre.assign(a.filters * co * co, 0.0);
    for (std::size_t f = 0; f < a.filters; ++f) {
        const double* k = filt + f * 9;
        double* out = tr.conv_pre.data() + f * co * co;
        for (std::size_t r = 0; r < co; ++r) {
            for (std::size_t c = 0; c < co; ++c) {
                double acc = fb[f];
                for (std::size_t dr = 0; dr < 3; ++dr)
                    for (std::size_t dc = 0; dc < 3; ++dc)
                        acc += px[(r + dr) * s + (c + dc)] * k[dr * 3 + dc];
                out[r * co + c] = acc;
            }
        }
    }

    // ReLU then 2x2/2 max-pool; ties keep the first window position.
    tr.pooled.assign(a.flat_dim(), 0.0);
    tr.argmax.assign(a.flat_dim(), 0);
    for (std::size_t f = 0; f < a.filters; ++f) {
        const double* in = tr.conv_pre.data() + f * co * co;
        for (std::size_t pr = 0; pr < po; ++pr) {
            for (std::size_t pc = 0; pc < po; ++pc) {
                double best = -1.0;
                std::size_t best_idx = 0;
                for (std::size_t dr = 0; dr < 2; ++dr) {
                    for (std::size_t dc = 0; dc < 2; ++dc) {
                        const std::size_t idx = (2 * pr + dr) * co + (2 * pc + dc);
                        const double v = std::max(0.0, in[idx]);
                        if (v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t p_idx = f * po * po + pr * po + pc;
                tr.pooled[p_idx] = best;
                tr.argmax[p_idx] = f * co * co + best_idx;
            }
        }
    }

    const double* w1 = w.flat.data() + w.w1_off();
    const double* b1 = w.flat.data() + w.b1_off();
    tr.d1_pre.assign(a.dense1, 0.0);
    tr.a1.assign(a.dense1, 0.0);
    const std::size_t flat = a.flat_dim();
    for (std::size_t u = 0; u < a.dense1; ++u) {
        const double* row = w1 + u * flat;
        double acc = b1[u];
        for (std::size_t i = 0; i < flat; ++i) acc += row[i] * tr.pooled[i];
        tr.d1_pre[u] = acc;
        tr.a1[u] = std::max(0.0, acc);
    }

    const double* w2 = w.flat.data() + w.w2_off();
    const double* b2 = w.flat.data() + w.b2_off();
    std::vector<double> logits(a.classes);
    for (std::size_t k = 0; k < a.classes; ++k) {
        double acc = b2[k];
        for (std::size_t u = 0; u < a.dense1; ++u) acc += w2[k * a.dense1 + u] * tr.a1[u];
        logits[k] = acc;
    }
    return softmax(logits);
}

}  // namespace

ProbVector cnn_forward(std::span<const double> pixels, const CnnWeights& w) {
    CnnTrace tr;
    return forward_impl(pixels, w, tr);
}

ProbVector cnn_forward(const ByteImage& img, const CnnWeights& w) {
    if (img.side != w.arch.side)
        throw Error(Errc::SideMismatch, "cnn_forward: image side " + std::to_string(img.side) +
                                            " != arch side " + std::to_string(w.arch.side));
    return cnn_forward(std::span<const double>(img.pixels), w);
}

std::vector<double> cnn_pooled_maps(std::span<const double> pixels, const CnnWeights& w) {
    CnnTrace tr;
    forward_impl(pixels, w, tr);
    return tr.pooled;
}

double cnn_loss_grad(std::span<const double> px, std::size_t label, const CnnWeights& w,
                     std::vector<double>& grad) {
    const CnnArch& a = w.arch;
    CnnTrace tr;
    const ProbVector probs = forward_impl(px, w, tr);
    const double loss = cross_entropy(probs, label);

    const std::size_t s = a.side, co = a.conv_out();
    const std::size_t flat = a.flat_dim();
    const double* w1 = w.flat.data() + w.w1_off();
    const double* w2 = w.flat.data() + w.w2_off();
    double* g_filt = grad.data();
    double* g_fb = grad.data() + w.fb_off();
    double* g_w1 = grad.data() + w.w1_off();
    double* g_b1 = grad.data() + w.b1_off();
    double* g_w2 = grad.data() + w.w2_off();
    double* g_b2 = grad.data() + w.b2_off();

    std::vector<double> da1(a.dense1, 0.0);
    for (std::size_t k = 0; k < a.classes; ++k) {
        const double dlogit = probs[k] - (k == label ? 1.0 : 0.0);
        g_b2[k] += dlogit;
        for (std::size_t u = 0; u < a.dense1; ++u) {
            g_w2[k * a.dense1 + u] += dlogit * tr.a1[u];
            da1[u] += w2[k * a.dense1 + u] * dlogit;
        }
    }

    std::vector<double> dpool(flat, 0.0);
    for (std::size_t u = 0; u < a.dense1; ++u) {
        if (tr.d1_pre[u] <= 0.0) continue;
        const double dz = da1[u];
        g_b1[u] += dz;
        const double* row = w1 + u * flat;
        double* g_row = g_w1 + u * flat;
        for (std::size_t i = 0; i < flat; ++i) {
            g_row[i] += dz * tr.pooled[i];
            dpool[i] += row[i] * dz;
        }
    }

    // Unpool: gradient flows only to each window's argmax, then through ReLU.
    std::vector<double> dconv(a.filters * co * co, 0.0);
    for (std::size_t i = 0; i < flat; ++i) {
        const std::size_t src = tr.argmax[i];
        if (tr.conv_pre[src] > 0.0) dconv[src] += dpool[i];
    }

    for (std::size_t f = 0; f < a.filters; ++f) {
        const double* d_out = dconv.data() + f * co * co;
        double* g_k = g_filt + f * 9;
        double bias_acc = 0.0;
        for (std::size_t r = 0; r < co; ++r) {
            for (std::size_t c = 0; c < co; ++c) {
                const double d = d_out[r * co + c];
                if (d == 0.0) continue;
                bias_acc += d;
                for (std::size_t dr = 0; dr < 3; ++dr)
                    for (std::size_t dc = 0; dc < 3; ++dc)
                        g_k[dr * 3 + dc] += d * px[(r + dr) * s + (c + dc)];
            }
        }
        g_fb[f] += bias_acc;
    }
    return loss;
}

namespace {

double batch_gradient_impl(const CnnWeights& w, const DataMatrix& images,
                           const std::vector<int>& labels, std::span<const std::size_t> rows,
                           std::vector<double>& grad_out, bool parallel) {
    const std::size_t b = rows.size();
    grad_out.assign(w.total_params(), 0.0);
    const double inv = 1.0 / static_cast<double>(b);
    double loss = 0.0;

    // Waves bound the number of live per-sample gradient buffers; the
    // reduction order is sample order regardless of wave size.
    const std::size_t wave =
        parallel ? std::min<std::size_t>(b, static_cast<std::size_t>(std::max(2 * max_threads(), 2)))
                 : 1;
    std::vector<std::vector<double>> sample_grads(wave);
    std::vector<double> losses(wave);

    for (std::size_t start = 0; start < b; start += wave) {
        const std::size_t count = std::min(wave, b - start);
#pragma omp parallel for schedule(dynamic) if (parallel)
        for (long long s = 0; s < static_cast<long long>(count); ++s) {
            const std::size_t row = rows[start + static_cast<std::size_t>(s)];
            auto& g = sample_grads[static_cast<std::size_t>(s)];
            g.assign(w.total_params(), 0.0);
            losses[static_cast<std::size_t>(s)] =
                cnn_loss_grad(images.row(row), static_cast<std::size_t>(labels[row]), w, g);
        }
        for (std::size_t s = 0; s < count; ++s) {
            loss += losses[s];
            const auto& g = sample_grads[s];
            for (std::size_t i = 0; i < grad_out.size(); ++i) grad_out[i] += g[i] * inv;
        }
    }
    return loss * inv;
}

}  // namespace

double cnn_batch_gradient(const CnnWeights& w, const DataMatrix& images,
                          const std::vector<int>& labels, std::span<const std::size_t> rows,
                          std::vector<double>& grad_out) {
    return batch_gradient_impl(w, images, labels, rows, grad_out, true);
}

double cnn_batch_gradient_serial(const CnnWeights& w, const DataMatrix& images,
                                 const std::vector<int>& labels, std::span<const std::size_t> rows,
                                 std::vector<double>& grad_out) {
    return batch_gradient_impl(w, images, labels, rows, grad_out, false);
}

CnnTrainResult train_cnn(const DataMatrix& images, const std::vector<int>& labels,
                         const CnnArch& arch, const TrainOptions& opts) {
    if (images.cols != arch.side * arch.side)
        throw Error(Errc::SideMismatch, "train_cnn: dataset columns != side*side");

    CnnTrainResult out;
    out.weights = init_cnn_weights(arch, derive_seed(opts.seed, 0));
    out.log = detail::minibatch_train(
        out.weights.flat, images.rows, labels, opts, "train_cnn",
        [&](std::span<const std::size_t> rows, std::vector<double>& grad) {
            return cnn_batch_gradient(out.weights, images, labels, rows, grad);
        },
        [&](std::size_t row) { return cnn_forward(images.row(row), out.weights); });
    return out;
}

DataMatrix cnn_predict_batch(const CnnWeights& w, const DataMatrix& images) {
    DataMatrix out(images.rows, w.arch.classes);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(images.rows); ++i) {
        const ProbVector p = cnn_forward(images.row(static_cast<std::size_t>(i)), w);
        std::copy(p.begin(), p.end(), out.row(static_cast<std::size_t>(i)).begin());
    }
    return out;
}

}  // namespace pemux
