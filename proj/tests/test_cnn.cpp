#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pemux/cnn.hpp"
#include "pemux/rng.hpp"
#include "support/oracles.hpp"

using namespace pemux;

namespace {

CnnWeights random_weights(const CnnArch& arch, std::uint64_t seed, double scale = 0.5) {
    CnnWeights w;
    w.arch = arch;
    w.flat.resize(w.total_params());
    Rng rng(seed);
    for (double& v : w.flat) v = rng.uniform(-scale, scale);
    return w;
}

// Central differences are only valid away from the ReLU and max-pool kinks;
// resample until every pre-activation and pool margin clears 1e-3.
bool safe_gradient_point(const CnnWeights& w, const std::vector<double>& img) {
    const CnnArch& a = w.arch;
    const std::size_t s = a.side, co = a.conv_out(), po = a.pool_out();
    const double margin = 1e-3;

    std::vector<double> conv(a.filters * co * co);
    for (std::size_t f = 0; f < a.filters; ++f)
        for (std::size_t r = 0; r < co; ++r)
            for (std::size_t c = 0; c < co; ++c) {
                double acc = w.flat[w.fb_off() + f];
                for (std::size_t dr = 0; dr < 3; ++dr)
                    for (std::size_t dc = 0; dc < 3; ++dc)
                        acc += img[(r + dr) * s + (c + dc)] * w.flat[f * 9 + dr * 3 + dc];
                if (std::abs(acc) < margin) return false;
                conv[f * co * co + r * co + c] = std::max(0.0, acc);
            }

    std::vector<double> pooled(a.flat_dim());
    for (std::size_t f = 0; f < a.filters; ++f)
        for (std::size_t pr = 0; pr < po; ++pr)
            for (std::size_t pc = 0; pc < po; ++pc) {
                double m1 = -1.0, m2 = -1.0;
                for (std::size_t dr = 0; dr < 2; ++dr)
                    for (std::size_t dc = 0; dc < 2; ++dc) {
                        const double v = conv[f * co * co + (2 * pr + dr) * co + (2 * pc + dc)];
                        if (v > m1) {
                            m2 = m1;
                            m1 = v;
                        } else if (v > m2) {
                            m2 = v;
                        }
                    }
                if (m1 - m2 < margin) return false;
                pooled[f * po * po + pr * po + pc] = m1;
            }

    for (std::size_t u = 0; u < a.dense1; ++u) {
        double acc = w.flat[w.b1_off() + u];
        for (std::size_t i = 0; i < a.flat_dim(); ++i)
            acc += w.flat[w.w1_off() + u * a.flat_dim() + i] * pooled[i];
        if (std::abs(acc) < margin) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("parameter counts reproduce the published table for the 32x32 net") {
    const auto counts = param_count(cnn_arch_full());
    REQUIRE(counts.size() == 5);
    CHECK(counts[0] == 320);
    CHECK(counts[1] == 0);
    CHECK(counts[2] == 0);
    CHECK(counts[3] == 921728);
    CHECK(counts[4] == 645);

    // Shapes along the way: 32 -> 30 -> 15 -> 7200.
    const CnnArch a = cnn_arch_full();
    CHECK(a.conv_out() == 30);
    CHECK(a.pool_out() == 15);
    CHECK(a.flat_dim() == 7200);
}

TEST_CASE("parameter counts for the 16x16 header net") {
    const auto counts = param_count(cnn_arch_header());
    CHECK(counts[0] == 320);
    CHECK(counts[3] == 1568 * 128 + 128);  // 200,832
    CHECK(counts[4] == 645);
}

TEST_CASE("zero filters count zero conv parameters") {
    CnnArch arch{8, 0, 4, 5};
    CHECK(param_count(arch)[0] == 0);
}

TEST_CASE("zero weights give a uniform prediction") {
    const CnnArch arch{16, 8, 16, 5};
    CnnWeights w;
    w.arch = arch;
    w.flat.assign(w.total_params(), 0.0);
    const ProbVector p = cnn_forward(std::vector<double>(16 * 16, 0.0), w);
    for (double v : p) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("convolution matches the sliding-window oracle") {
    // Positive weights and inputs so ReLU is the identity; the pooled map of
    // a 5x5 input then reads back the max corner of the oracle's conv grid.
    const CnnArch arch{5, 1, 2, 2};
    CnnWeights w = random_weights(arch, 42);
    Rng rng(43);
    std::vector<double> img(25);
    for (double& v : img) v = rng.uniform(0.3, 0.8);
    for (int i = 0; i < 9; ++i) w.flat[i] = std::abs(w.flat[i]);
    w.flat[w.fb_off()] = 0.1;

    std::array<double, 9> filter;
    for (int i = 0; i < 9; ++i) filter[i] = w.flat[i];
    const auto conv = oracle::conv3x3_valid(img, 5, filter, 0.1);
    const auto pooled = cnn_pooled_maps(img, w);
    REQUIRE(pooled.size() == 1);
    CHECK(pooled[0] == doctest::Approx(std::max({conv[0], conv[1], conv[3], conv[4]})).epsilon(1e-12));
}

TEST_CASE("max pooling keeps the window maximum") {
    // One filter that copies the center pixel: conv_pre[r][c] = img[r+1][c+1].
    const CnnArch arch{4, 1, 2, 2};
    CnnWeights w;
    w.arch = arch;
    w.flat.assign(w.total_params(), 0.0);
    w.flat[4] = 1.0;  // center of the 3x3 kernel

    std::vector<double> img(16, 0.0);
    // conv output is the 2x2 block img[1..2][1..2]; make it [[1,2],[3,4]]/10.
    img[1 * 4 + 1] = 0.1;
    img[1 * 4 + 2] = 0.2;
    img[2 * 4 + 1] = 0.3;
    img[2 * 4 + 2] = 0.4;

    const auto pooled = cnn_pooled_maps(img, w);
    REQUIRE(pooled.size() == 1);
    CHECK(pooled[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("side mismatch is rejected") {
    const CnnWeights w = random_weights(cnn_arch_header(), 3);
    try {
        cnn_forward(std::vector<double>(32 * 32, 0.0), w);
        FAIL("expected SideMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SideMismatch);
    }
    const ByteImage img = byte_image(std::vector<std::uint8_t>(1024, 1), 32, 0);
    CHECK_THROWS_AS(cnn_forward(img, w), Error);
}

TEST_CASE("full-network analytic gradient matches central differences") {
    const CnnArch arch{8, 4, 8, 5};
    Rng rng(500);
    int checked = 0, attempts = 0;
    while (checked < 5 && attempts < 200) {
        ++attempts;
        const CnnWeights w = random_weights(arch, 700 + attempts);
        std::vector<double> img(64);
        for (double& v : img) v = rng.uniform();
        if (!safe_gradient_point(w, img)) continue;

        const std::size_t label = rng.below(5);
        std::vector<double> analytic(w.total_params(), 0.0);
        cnn_loss_grad(img, label, w, analytic);

        auto loss_fn = [&](const std::vector<double>& flat) {
            CnnWeights probe;
            probe.arch = arch;
            probe.flat = flat;
            return cross_entropy(cnn_forward(std::span<const double>(img), probe), label);
        };
        const std::vector<double> numeric = finite_diff_grad(loss_fn, w.flat, 1e-4);
        CHECK(relative_error(analytic, numeric) < 1e-4);
        ++checked;
    }
    CHECK(checked == 5);
}

TEST_CASE("pool backward conserves gradient mass and routes to argmax only") {
    // With a single conv filter copying the center pixel and distinct window
    // values, the loss gradient with respect to the non-max inputs is zero.
    const CnnArch arch{4, 1, 2, 2};
    CnnWeights w = random_weights(arch, 8);
    w.flat.assign(w.total_params(), 0.0);
    w.flat[4] = 1.0;
    Rng rng(9);
    for (std::size_t i = w.w1_off(); i < w.flat.size(); ++i) w.flat[i] = rng.uniform(-0.5, 0.5);

    std::vector<double> img(16, 0.0);
    img[1 * 4 + 1] = 0.1;
    img[1 * 4 + 2] = 0.2;
    img[2 * 4 + 1] = 0.3;
    img[2 * 4 + 2] = 0.4;  // argmax

    auto loss_at = [&](const std::vector<double>& probe_img) {
        return cross_entropy(cnn_forward(std::span<const double>(probe_img), w), 0);
    };
    const double base = loss_at(img);
    for (const std::size_t idx : {std::size_t(5), std::size_t(6), std::size_t(9)}) {
        std::vector<double> nudged = img;
        nudged[idx] += 1e-5;  // stays below the max
        CHECK(std::abs(loss_at(nudged) - base) < 1e-12);
    }
    std::vector<double> nudged_max = img;
    nudged_max[10] += 1e-5;
    CHECK(std::abs(loss_at(nudged_max) - base) > 1e-10);
}

TEST_CASE("shifting the input by two pixels shifts pooled maps by one cell") {
    const CnnArch arch{16, 4, 8, 3};
    const CnnWeights w = random_weights(arch, 21);
    Rng rng(22);
    std::vector<double> img(256);
    for (double& v : img) v = rng.uniform();

    std::vector<double> shifted(256, 0.0);  // shift right+down by 2
    for (std::size_t r = 2; r < 16; ++r)
        for (std::size_t c = 2; c < 16; ++c) shifted[r * 16 + c] = img[(r - 2) * 16 + (c - 2)];

    const auto base = cnn_pooled_maps(img, w);
    const auto moved = cnn_pooled_maps(shifted, w);
    const std::size_t po = arch.pool_out();
    // Interior cells of the shifted map equal the unshifted map one cell up-left.
    for (std::size_t f = 0; f < arch.filters; ++f)
        for (std::size_t pr = 1; pr + 1 < po; ++pr)
            for (std::size_t pc = 1; pc + 1 < po; ++pc) {
                const double a = moved[f * po * po + pr * po + pc];
                const double b = base[f * po * po + (pr - 1) * po + (pc - 1)];
                CHECK(a == doctest::Approx(b).epsilon(1e-12));
            }
}

TEST_CASE("parallel batch gradient is bit-identical to the serial reference") {
    const CnnArch arch{8, 4, 8, 5};
    const CnnWeights w = random_weights(arch, 31);
    Rng rng(32);
    DataMatrix imgs(7, 64);
    for (double& v : imgs.data) v = rng.uniform();
    std::vector<int> labels(7);
    for (auto& l : labels) l = static_cast<int>(rng.below(5));
    std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6};

    std::vector<double> g_par, g_ser;
    const double lp = cnn_batch_gradient(w, imgs, labels, rows, g_par);
    const double ls = cnn_batch_gradient_serial(w, imgs, labels, rows, g_ser);
    CHECK(lp == ls);
    CHECK(g_par == g_ser);
}

TEST_CASE("learns a two-class rule keyed on a bright 3x3 motif") {
    Rng rng(81);
    const std::size_t n = 200, side = 12;
    DataMatrix imgs(n, side * side);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool hot = i % 2 == 0;
        labels[i] = hot ? 1 : 0;
        auto row = imgs.row(i);
        for (double& v : row) v = rng.uniform(0.0, 0.3);
        if (hot) {
            for (std::size_t dr = 0; dr < 3; ++dr)
                for (std::size_t dc = 0; dc < 3; ++dc) row[(4 + dr) * side + 6 + dc] = 0.95;
        }
    }

    const CnnArch arch{side, 8, 16, 2};
    TrainOptions opts;
    opts.seed = 2;
    opts.epochs = 8;
    const CnnTrainResult result = train_cnn(imgs, labels, arch, opts);
    CHECK(result.log.val_accuracy.back() >= 0.95);
}

TEST_CASE("training twice with the same seed gives identical weights") {
    Rng rng(83);
    DataMatrix imgs(40, 64);
    for (double& v : imgs.data) v = rng.uniform();
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 3);

    const CnnArch arch{8, 4, 8, 3};
    TrainOptions opts;
    opts.seed = 77;
    opts.epochs = 3;
    const CnnTrainResult a = train_cnn(imgs, labels, arch, opts);
    const CnnTrainResult b = train_cnn(imgs, labels, arch, opts);
    CHECK(a.weights.flat == b.weights.flat);
}
