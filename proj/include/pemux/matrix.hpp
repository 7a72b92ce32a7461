#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pemux {

// Row-major dense matrix of doubles; the one data layout shared by the
// classifiers and the pipeline.
struct DataMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DataMatrix() = default;
    DataMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

    void push_row(std::span<const double> values) {
        cols = values.size();
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }
};

}  // namespace pemux
