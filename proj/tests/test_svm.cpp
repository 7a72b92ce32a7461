#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pemux/rng.hpp"
#include "pemux/svm.hpp"
#include "support/qp_oracle.hpp"

using namespace pemux;

namespace {

double gaussian(Rng& rng) {
    const double u1 = rng.uniform(1e-12, 1.0);
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Well-separated 2-D blobs, one per class.
void make_blobs(Rng& rng, const std::vector<std::pair<double, double>>& centers,
                std::size_t per_class, double spread, DataMatrix& x, std::vector<int>& y) {
    for (std::size_t k = 0; k < centers.size(); ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::vector<double> row = {centers[k].first + spread * gaussian(rng),
                                             centers[k].second + spread * gaussian(rng)};
            x.push_row(row);
            y.push_back(static_cast<int>(k));
        }
    }
}

std::size_t train_errors(const BinarySvm& machine, const DataMatrix& x, const std::vector<int>& y) {
    std::size_t errors = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double f = decision_function(machine, x.row(i));
        if ((f >= 0 ? 1 : -1) != y[i]) ++errors;
    }
    return errors;
}

}  // namespace

TEST_CASE("kernel evaluations") {
    const SvmConfig rbf{KernelKind::Rbf, 1.0, 0.01};
    const std::vector<double> x = {1.0, 2.0, 3.0};
    CHECK(kernel_eval(rbf, x, x) == 1.0);

    const SvmConfig lin{KernelKind::Linear, 1.0, 1.0};
    const std::vector<double> ex = {1.0, 0.0};
    const std::vector<double> ey = {0.0, 5.0};
    CHECK(kernel_eval(lin, ex, ey) == 0.0);

    // ||x - y||^2 = 100 with gamma 0.01 lands exactly on exp(-1).
    const std::vector<double> a = {0.0, 0.0};
    const std::vector<double> b = {10.0, 0.0};
    CHECK(kernel_eval(rbf, a, b) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    const SvmConfig poly{KernelKind::Poly, 1.0, 0.5};
    const std::vector<double> p2 = {2.0};
    const std::vector<double> p3 = {3.0};
    CHECK(kernel_eval(poly, p2, p3) == doctest::Approx(64.0));  // (0.5*6+1)^3

    CHECK_THROWS_AS(kernel_eval(rbf, p2, ey), Error);
}

TEST_CASE("linearly separable blobs train to zero errors with a linear kernel") {
    Rng rng(42);
    DataMatrix x;
    std::vector<int> y01;
    make_blobs(rng, {{0, 0}, {6, 6}}, 25, 0.4, x, y01);
    std::vector<int> y;
    for (int l : y01) y.push_back(l == 0 ? -1 : 1);

    const SmoResult res = train_binary_smo(x, y, SvmConfig{KernelKind::Linear, 1.0, 1.0});
    CHECK(train_errors(res.machine, x, y) == 0);
    CHECK(res.converged);
}

TEST_CASE("the kernel trick: rbf separates xor, linear cannot") {
    DataMatrix x;
    x.push_row(std::vector<double>{0.0, 0.0});
    x.push_row(std::vector<double>{1.0, 1.0});
    x.push_row(std::vector<double>{0.0, 1.0});
    x.push_row(std::vector<double>{1.0, 0.0});
    const std::vector<int> y = {1, 1, -1, -1};

    const SmoResult rbf = train_binary_smo(x, y, SvmConfig{KernelKind::Rbf, 10.0, 1.0});
    CHECK(train_errors(rbf.machine, x, y) == 0);

    const SmoResult lin = train_binary_smo(x, y, SvmConfig{KernelKind::Linear, 10.0, 1.0});
    CHECK(train_errors(lin.machine, x, y) > 0);
}

TEST_CASE("tiny instances match the brute-force dual and satisfy KKT") {
    for (const auto& inst : oracle::qp_battery()) {
        CAPTURE(inst.name);
        const SmoResult res = train_binary_smo(inst.x, inst.y, inst.cfg);
        const double brute = oracle::qp_bruteforce_max(inst.x, inst.y, inst.cfg);
        CHECK(std::abs(res.dual_objective - brute) <= 1e-4);
        CHECK(max_kkt_violation(inst.x, inst.y, res) <= 1e-3);

        double balance = 0.0;
        for (std::size_t i = 0; i < res.alphas.size(); ++i) balance += res.alphas[i] * inst.y[i];
        CHECK(std::abs(balance) <= 1e-6);
        for (double a : res.alphas) {
            CHECK(a >= 0.0);
            CHECK(a <= inst.cfg.C);
        }
    }
}

TEST_CASE("single-class input is rejected") {
    DataMatrix x;
    x.push_row(std::vector<double>{0.0});
    x.push_row(std::vector<double>{1.0});
    try {
        train_binary_smo(x, {1, 1}, SvmConfig{});
        FAIL("expected SingleClassInput");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SingleClassInput);
    }
}

TEST_CASE("platt scaling calibrates separated scores sharply") {
    std::vector<double> scores;
    std::vector<int> labels;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        const bool pos = i % 2 == 0;
        scores.push_back((pos ? 10.0 : -10.0) + rng.uniform(-0.5, 0.5));
        labels.push_back(pos ? 1 : -1);
    }
    const auto [a, b] = fit_platt(scores, labels);
    const auto proba = [&](double f) { return 1.0 / (1.0 + std::exp(a * f + b)); };
    CHECK(proba(10.0) > 0.99);
    CHECK(proba(-10.0) < 0.01);
}

TEST_CASE("platt on label-independent scores flattens to the class prior") {
    Rng rng(8);
    std::vector<double> scores;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        scores.push_back(rng.uniform(-1.0, 1.0));
        labels.push_back(i % 4 == 0 ? 1 : -1);  // prior 0.25
    }
    const auto [a, b] = fit_platt(scores, labels);
    const auto proba = [&](double f) { return 1.0 / (1.0 + std::exp(a * f + b)); };
    CHECK(std::abs(proba(0.0) - 0.25) < 0.08);
    CHECK(std::abs(proba(0.9) - 0.25) < 0.12);
}

TEST_CASE("flipping labels flips the sign of the platt slope") {
    std::vector<double> scores;
    std::vector<int> labels, flipped;
    Rng rng(5);
    for (int i = 0; i < 60; ++i) {
        const bool pos = i % 3 != 0;
        scores.push_back((pos ? 2.0 : -2.0) + rng.uniform(-1.0, 1.0));
        labels.push_back(pos ? 1 : -1);
        flipped.push_back(pos ? -1 : 1);
    }
    const auto [a1, b1] = fit_platt(scores, labels);
    const auto [a2, b2] = fit_platt(scores, flipped);
    CHECK(a1 < 0.0);  // higher score => higher P(+1) under 1/(1+exp(a f + b))
    CHECK(a2 > 0.0);
    (void)b1; (void)b2;
}

TEST_CASE("platt rejects degenerate scores") {
    try {
        fit_platt({1.0, 1.0, 1.0, 1.0}, {1, -1, 1, -1});
        FAIL("expected DegenerateScores");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DegenerateScores);
    }
}

TEST_CASE("multiclass one-vs-rest on three separated blobs") {
    Rng rng(31);
    DataMatrix x;
    std::vector<int> y;
    make_blobs(rng, {{0, 0}, {8, 0}, {0, 8}}, 30, 0.5, x, y);

    const SvmModel model = train_multiclass(x, y, 3, SvmConfig{KernelKind::Rbf, 10.0, 0.5});
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i)
        if (predict_class(model, x.row(i)) == static_cast<std::size_t>(y[i])) ++correct;
    CHECK(static_cast<double>(correct) / x.rows >= 0.99);

    // Probabilities behave: valid, argmax deep inside a blob is that blob.
    const ProbVector p = predict_proba(model, std::vector<double>{8.0, 0.0});
    CHECK(is_prob_vector(p));
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);
}

TEST_CASE("two-class one-vs-rest agrees with the binary machine's sign") {
    Rng rng(77);
    DataMatrix x;
    std::vector<int> y01;
    make_blobs(rng, {{0, 0}, {5, 5}}, 20, 0.4, x, y01);
    std::vector<int> ypm;
    for (int l : y01) ypm.push_back(l == 1 ? 1 : -1);

    const SvmConfig cfg{KernelKind::Linear, 1.0, 1.0};
    const SvmModel model = train_multiclass(x, y01, 2, cfg);
    const SmoResult binary = train_binary_smo(x, ypm, cfg);

    for (std::size_t i = 0; i < x.rows; ++i) {
        const bool multi_says_one = predict_class(model, x.row(i)) == 1;
        const bool binary_says_one = decision_function(binary.machine, x.row(i)) >= 0;
        CHECK(multi_says_one == binary_says_one);
    }
}

TEST_CASE("degenerate one-sample-per-class training still works") {
    DataMatrix x;
    std::vector<int> y;
    for (int k = 0; k < 5; ++k) {
        std::vector<double> row(4, 0.0);
        row[k % 4] = 1.0 + k;
        x.push_row(row);
        y.push_back(k);
    }
    const SvmModel model = train_multiclass(x, y, 5, SvmConfig{KernelKind::Rbf, 10.0, 0.5});
    for (std::size_t i = 0; i < x.rows; ++i)
        CHECK(predict_class(model, x.row(i)) == static_cast<std::size_t>(y[i]));
}

TEST_CASE("missing class is rejected") {
    DataMatrix x;
    x.push_row(std::vector<double>{0.0});
    x.push_row(std::vector<double>{1.0});
    try {
        train_multiclass(x, {0, 2}, 3, SvmConfig{});
        FAIL("expected MissingClass");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::MissingClass);
    }
}

TEST_CASE("probability outputs normalize and respect symmetry") {
    Rng rng(19);
    DataMatrix x;
    std::vector<int> y;
    make_blobs(rng, {{-3, 0}, {3, 0}}, 25, 0.3, x, y);
    const SvmModel model = train_multiclass(x, y, 2, SvmConfig{KernelKind::Rbf, 10.0, 0.5});

    for (int iter = 0; iter < 20; ++iter) {
        const std::vector<double> probe = {rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const ProbVector p = predict_proba(model, probe);
        double sum = 0.0;
        for (double v : p) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }

    // The midpoint of a symmetric two-blob problem is maximally ambiguous.
    const ProbVector mid = predict_proba(model, std::vector<double>{0.0, 0.0});
    CHECK(mid[0] == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("argmax predictions survive duplicating every training sample") {
    Rng rng(23);
    DataMatrix x;
    std::vector<int> y;
    make_blobs(rng, {{0, 0}, {4, 4}, {4, -4}}, 15, 0.5, x, y);

    DataMatrix x2 = x;
    std::vector<int> y2 = y;
    for (std::size_t i = 0; i < x.rows; ++i) {
        x2.push_row(x.row(i));
        y2.push_back(y[i]);
    }

    const SvmConfig cfg{KernelKind::Rbf, 10.0, 0.3};
    const SvmModel m1 = train_multiclass(x, y, 3, cfg);
    const SvmModel m2 = train_multiclass(x2, y2, 3, cfg);
    for (int iter = 0; iter < 40; ++iter) {
        const std::vector<double> probe = {rng.uniform(-2, 6), rng.uniform(-6, 6)};
        CHECK(predict_class(m1, probe) == predict_class(m2, probe));
    }
}
