#pragma once

// Shared minibatch-Adam driver for the sequence and image classifiers.
// Internal to src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pemux/errors.hpp"
#include "pemux/ml_math.hpp"
#include "pemux/rng.hpp"
#include "pemux/train_common.hpp"

namespace pemux::detail {

// batch_grad(rows, grad_out) -> mean loss over the batch;
// predict(row) -> ProbVector. predict must be pure (it runs concurrently).
template <typename BatchGradFn, typename PredictFn>
TrainLog minibatch_train(std::vector<double>& params, std::size_t n_rows,
                         const std::vector<int>& labels, const TrainOptions& opts,
                         const char* model_name, BatchGradFn&& batch_grad, PredictFn&& predict) {
    bool multi = false;
    for (int l : labels)
        if (l != labels[0]) multi = true;
    if (!multi)
        throw Error(Errc::SingleClassInput, std::string(model_name) + ": need at least 2 classes");

    std::vector<std::size_t> indices(n_rows);
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng split_rng(derive_seed(opts.seed, 1));
    split_rng.shuffle(indices);
    const std::size_t val_n =
        static_cast<std::size_t>(std::floor(opts.val_frac * static_cast<double>(n_rows) + 0.5));
    std::vector<std::size_t> train_idx(indices.begin(), indices.end() - static_cast<long>(val_n));
    std::vector<std::size_t> val_idx(indices.end() - static_cast<long>(val_n), indices.end());

    AdamState adam(params.size(), opts.learning_rate);
    std::vector<double> grad;
    TrainLog log;

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng epoch_rng(derive_seed(opts.seed, 100 + epoch));
        epoch_rng.shuffle(train_idx);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += opts.batch) {
            const std::size_t count = std::min(opts.batch, train_idx.size() - start);
            std::span<const std::size_t> rows(train_idx.data() + start, count);
            const double loss = batch_grad(rows, grad);
            if (!std::isfinite(loss))
                throw Error(Errc::NonFiniteState,
                            std::string(model_name) + ": diverged at epoch " +
                                std::to_string(epoch) + " batch " + std::to_string(start / opts.batch));
            adam_step(params, grad, adam);
            epoch_loss += loss * static_cast<double>(count);
            seen += count;
        }
        log.train_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(seen, 1)));

        std::vector<double> sample_loss(val_idx.size(), 0.0);
        std::vector<std::uint8_t> sample_hit(val_idx.size(), 0);
#pragma omp parallel for schedule(dynamic)
        for (long long s = 0; s < static_cast<long long>(val_idx.size()); ++s) {
            const std::size_t row = val_idx[static_cast<std::size_t>(s)];
            const ProbVector p = predict(row);
            sample_loss[static_cast<std::size_t>(s)] =
                cross_entropy(p, static_cast<std::size_t>(labels[row]));
            const std::size_t pred =
                static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            sample_hit[static_cast<std::size_t>(s)] = pred == static_cast<std::size_t>(labels[row]);
        }
        double val_loss = 0.0;
        std::size_t val_correct = 0;
        for (std::size_t s = 0; s < val_idx.size(); ++s) {
            val_loss += sample_loss[s];
            val_correct += sample_hit[s];
        }
        const double vn = static_cast<double>(std::max<std::size_t>(val_idx.size(), 1));
        log.val_loss.push_back(val_loss / vn);
        log.val_accuracy.push_back(static_cast<double>(val_correct) / vn);
    }
    return log;
}

}  // namespace pemux::detail
