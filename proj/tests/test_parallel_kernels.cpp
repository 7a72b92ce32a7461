#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pemux/cnn.hpp"
#include "pemux/lstm.hpp"
#include "pemux/parallel.hpp"
#include "pemux/rng.hpp"
#include "pemux/svm.hpp"
#include "pemux/synth_corpus.hpp"

using namespace pemux;

// The OpenMP kernels assign each output element (or per-sample buffer) to
// one thread and reduce in a fixed order, so they must agree with the serial
// references bit for bit, at any thread count.

TEST_CASE("gram matrix: openmp == serial, bitwise") {
    Rng rng(1);
    DataMatrix x(96, 64);
    for (double& v : x.data) v = rng.uniform();
    for (KernelKind k : {KernelKind::Poly, KernelKind::Linear, KernelKind::Rbf}) {
        const SvmConfig cfg{k, 1.0, 0.3};
        CHECK(gram_matrix(x, cfg).data == gram_matrix_serial(x, cfg).data);
    }
}

TEST_CASE("lstm batch gradient: openmp == serial, bitwise") {
    const LstmConfig cfg{12, 5, 40};
    LstmWeights w = init_lstm_weights(cfg, 2);
    Rng rng(3);
    DataMatrix seqs(17, 40);
    for (double& v : seqs.data) v = rng.uniform();
    std::vector<int> labels(17);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    std::vector<std::size_t> rows(17);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

    std::vector<double> gp, gs;
    const double lp = lstm_batch_gradient(w, seqs, labels, rows, gp);
    const double ls = lstm_batch_gradient_serial(w, seqs, labels, rows, gs);
    CHECK(lp == ls);
    CHECK(gp == gs);
}

TEST_CASE("cnn batch gradient: openmp == serial, bitwise") {
    const CnnArch arch{16, 8, 16, 5};
    CnnWeights w = init_cnn_weights(arch, 4);
    Rng rng(5);
    DataMatrix imgs(13, 256);
    for (double& v : imgs.data) v = rng.uniform();
    std::vector<int> labels(13);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    std::vector<std::size_t> rows(13);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;

    std::vector<double> gp, gs;
    const double lp = cnn_batch_gradient(w, imgs, labels, rows, gp);
    const double ls = cnn_batch_gradient_serial(w, imgs, labels, rows, gs);
    CHECK(lp == ls);
    CHECK(gp == gs);
}

TEST_CASE("results do not depend on the thread count") {
    const int full = max_threads();

    auto specs = default_family_specs();
    for (auto& s : specs) s.sample_count = 8;

    set_max_threads(1);
    std::vector<SampleData> one;
    for (const auto& s : specs) one.push_back(generate_family_sample(s, 9));
    LstmWeights w1;
    {
        Rng rng(6);
        DataMatrix seqs(11, 30);
        for (double& v : seqs.data) v = rng.uniform();
        std::vector<int> labels(11);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
        TrainOptions opts;
        opts.seed = 10;
        opts.epochs = 2;
        w1 = train_lstm(seqs, labels, LstmConfig{6, 3, 30}, opts).weights;
    }

    set_max_threads(full);
    std::vector<SampleData> many;
    for (const auto& s : specs) many.push_back(generate_family_sample(s, 9));
    LstmWeights w2;
    {
        Rng rng(6);
        DataMatrix seqs(11, 30);
        for (double& v : seqs.data) v = rng.uniform();
        std::vector<int> labels(11);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
        TrainOptions opts;
        opts.seed = 10;
        opts.epochs = 2;
        w2 = train_lstm(seqs, labels, LstmConfig{6, 3, 30}, opts).weights;
    }

    for (std::size_t i = 0; i < one.size(); ++i) CHECK(one[i].bytes == many[i].bytes);
    CHECK(w1.flat == w2.flat);
}
