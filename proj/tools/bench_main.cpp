// Benchmark comparing the OpenMP kernels against their serial reference
// implementations. The kernels are written so both paths produce
// bit-identical output; this binary reports timings and verifies that.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "pemux/cnn.hpp"
#include "pemux/lstm.hpp"
#include "pemux/parallel.hpp"
#include "pemux/rng.hpp"
#include "pemux/svm.hpp"
#include "pemux/synth_corpus.hpp"

using namespace pemux;

namespace {

double time_of(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

void report_row(const char* name, double serial_s, double parallel_s, double diff) {
    std::printf("  %-24s  %9.4f s  %9.4f s  %6.2fx  max|diff| %.3g\n", name, serial_s, parallel_s,
                serial_s / parallel_s, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    set_max_threads(threads);
    std::printf("pemux kernel benchmark (%d threads)\n", max_threads());
    std::printf("  %-24s  %11s  %11s  %7s\n", "kernel", "serial", "openmp", "speedup");

    Rng rng(7);

    {
        const std::size_t n = 800, d = 256;
        DataMatrix x(n, d);
        for (double& v : x.data) v = rng.uniform();
        const SvmConfig cfg{KernelKind::Rbf, 10.0, 0.01};
        DataMatrix gs, gp;
        const double ts = time_of([&] { gs = gram_matrix_serial(x, cfg); }, 3);
        const double tp = time_of([&] { gp = gram_matrix(x, cfg); }, 3);
        report_row("gram_matrix 800x256", ts, tp, max_abs_diff(gs.data, gp.data));
    }

    {
        const LstmConfig cfg{64, 5, 324};
        const LstmWeights w = init_lstm_weights(cfg, 11);
        const std::size_t batch = 30;
        DataMatrix seqs(batch, cfg.seq_len);
        for (double& v : seqs.data) v = rng.uniform();
        std::vector<int> labels(batch);
        for (auto& l : labels) l = static_cast<int>(rng.below(5));
        std::vector<std::size_t> rows(batch);
        for (std::size_t i = 0; i < batch; ++i) rows[i] = i;

        std::vector<double> g_s, g_p;
        const double ts =
            time_of([&] { lstm_batch_gradient_serial(w, seqs, labels, rows, g_s); }, 3);
        const double tp = time_of([&] { lstm_batch_gradient(w, seqs, labels, rows, g_p); }, 3);
        report_row("lstm_batch_grad 30x324", ts, tp, max_abs_diff(g_s, g_p));
    }

    {
        const CnnArch arch = cnn_arch_full();
        const CnnWeights w = init_cnn_weights(arch, 13);
        const std::size_t batch = 30;
        DataMatrix imgs(batch, arch.side * arch.side);
        for (double& v : imgs.data) v = rng.uniform();
        std::vector<int> labels(batch);
        for (auto& l : labels) l = static_cast<int>(rng.below(5));
        std::vector<std::size_t> rows(batch);
        for (std::size_t i = 0; i < batch; ++i) rows[i] = i;

        std::vector<double> g_s, g_p;
        const double ts = time_of([&] { cnn_batch_gradient_serial(w, imgs, labels, rows, g_s); }, 3);
        const double tp = time_of([&] { cnn_batch_gradient(w, imgs, labels, rows, g_p); }, 3);
        report_row("cnn_batch_grad 30x32x32", ts, tp, max_abs_diff(g_s, g_p));
    }

    {
        // Corpus generation, one thread vs. the full budget; identical bytes
        // are checked through the manifest layouts.
        auto specs = default_family_specs();
        for (auto& s : specs) s.sample_count = 40;
        const int full = max_threads();
        CorpusManifest m1, m2;
        set_max_threads(1);
        const double ts = time_of([&] { m1 = generate_corpus(specs, 99, "bench_corpus_serial"); }, 1);
        set_max_threads(full);
        const double tp = time_of([&] { m2 = generate_corpus(specs, 99, "bench_corpus_parallel"); }, 1);
        double diff = 0.0;
        for (std::size_t i = 0; i < m1.rows.size(); ++i) {
            if (m1.rows[i].layout.file_size != m2.rows[i].layout.file_size ||
                m1.rows[i].layout.timestamp != m2.rows[i].layout.timestamp)
                diff = 1.0;
        }
        report_row("generate_corpus 240", ts, tp, diff);
    }

    return 0;
}
