#pragma once

#include <cstdint>
#include <vector>

namespace pemux {

// Minibatch training regimen shared by the sequence and image classifiers.
struct TrainOptions {
    std::size_t epochs = 10;
    std::size_t batch = 30;
    double val_frac = 0.2;
    std::uint64_t seed = 0;
    double learning_rate = 1e-3;
};

struct TrainLog {
    std::vector<double> train_loss;  // one entry per epoch (mean cross-entropy)
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
};

}  // namespace pemux
