#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "pemux/fusion.hpp"
#include "pemux/pipeline.hpp"
#include "pemux/rng.hpp"
#include "pemux/synth_corpus.hpp"

using namespace pemux;
namespace fs = std::filesystem;

namespace {

// Small calibrated corpus shared by the end-to-end fusion tests.
Dataset small_corpus(std::uint64_t seed, std::size_t per_family = 40) {
    static std::map<std::uint64_t, std::string> cache;
    std::string dir;
    if (auto it = cache.find(seed); it != cache.end()) {
        dir = it->second;
    } else {
        auto specs = default_family_specs();
        for (auto& s : specs) s.sample_count = per_family;
        dir = (fs::temp_directory_path() / ("pemux_fusion_corpus_" + std::to_string(seed))).string();
        fs::remove_all(dir);
        generate_corpus(specs, seed, dir);
        cache[seed] = dir;
    }
    Dataset ds = load_dataset(dir + "/manifest.csv");
    ds.tags = stratified_split(ds.labels, 0.2, experiment_split_seed(seed));
    ds.seed = seed;
    return ds;
}

double component_accuracy(const RegionModel& model, const Dataset& ds) {
    std::size_t correct = 0, total = 0;
    const DataMatrix probs = model.probabilities_batch(ds.files);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        const auto row = probs.row(i);
        const auto pred = std::max_element(row.begin(), row.end()) - row.begin();
        if (pred == ds.labels[i]) ++correct;
        ++total;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

double fusion_accuracy(const FusionModel& model, const Dataset& ds) {
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        const FusionPrediction pred = fusion_predict(model, ds.files[i]);
        if (pred.label == ds.label_names[static_cast<std::size_t>(ds.labels[i])]) ++correct;
        ++total;
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("fuse concatenates header first, sections second") {
    CHECK(fuse({1, 0, 0, 0, 0}, {0, 0, 0, 0, 1}) ==
          std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0, 1});
    CHECK(fuse({0.2, 0.2, 0.2, 0.2, 0.2}, {0.2, 0.2, 0.2, 0.2, 0.2}) ==
          std::vector<double>(10, 0.2));
    CHECK_THROWS_AS(fuse({0.5, 0.5}, {0.2, 0.2, 0.6}), Error);
}

TEST_CASE("fused halves each sum to one and reconstruct the inputs") {
    Rng rng(4);
    for (int iter = 0; iter < 25; ++iter) {
        ProbVector h(5), s(5);
        double hs = 0, ss = 0;
        for (int k = 0; k < 5; ++k) {
            h[k] = rng.uniform(0.01, 1.0);
            s[k] = rng.uniform(0.01, 1.0);
            hs += h[k];
            ss += s[k];
        }
        for (int k = 0; k < 5; ++k) {
            h[k] /= hs;
            s[k] /= ss;
        }
        const auto fused = fuse(h, s);
        double first = 0, second = 0;
        for (int k = 0; k < 5; ++k) {
            first += fused[k];
            second += fused[5 + k];
            CHECK(fused[k] == h[k]);
            CHECK(fused[5 + k] == s[k]);
        }
        CHECK(first == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(second == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("fused training features come only from the training partition") {
    DataMatrix h(6, 2), s(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        h.row(i)[0] = static_cast<double>(i);
        s.row(i)[0] = 10.0 + static_cast<double>(i);
    }
    std::vector<Partition> tags = {Partition::Train, Partition::Test, Partition::Train,
                                   Partition::Test, Partition::Train, Partition::Test};
    const DataMatrix fused = fused_matrix(h, s, tags, Partition::Train);
    REQUIRE(fused.rows == 3);
    CHECK(fused.row(0)[0] == 0.0);
    CHECK(fused.row(1)[0] == 2.0);
    CHECK(fused.row(2)[0] == 4.0);

    // Flipping one tag moves exactly one row between the partitions.
    tags[1] = Partition::Train;
    CHECK(fused_matrix(h, s, tags, Partition::Train).rows == 4);
    CHECK(fused_matrix(h, s, tags, Partition::Test).rows == 2);
}

TEST_CASE("end-to-end stacking on a calibrated corpus") {
    Dataset ds = small_corpus(906);
    ExperimentConfig cfg;
    cfg.seed = 906;
    cfg.epochs = 6;

    const BaselineResult header_svm = train_baseline(ds, ModelKind::Svm, Region::Header, cfg);
    const BaselineResult sections_cnn = train_baseline(ds, ModelKind::Cnn, Region::Sections, cfg);

    FusionSpec spec;
    spec.header_kind = ModelKind::Svm;
    spec.sections_kind = ModelKind::Cnn;
    const FusionModel fused = train_fusion(spec, header_svm.model, sections_cnn.model, ds);

    const double acc_h = component_accuracy(header_svm.model, ds);
    const double acc_s = component_accuracy(sections_cnn.model, ds);
    const double acc_f = fusion_accuracy(fused, ds);

    // Complementary components: stacking at least matches the best of them.
    CHECK(acc_f >= std::max(acc_h, acc_s) - 1e-9);

    // Determinism: the same inputs give the same prediction.
    const FusionPrediction p1 = fusion_predict(fused, ds.files[0]);
    const FusionPrediction p2 = fusion_predict(fused, ds.files[0]);
    CHECK(p1.label == p2.label);
    CHECK(p1.probabilities == p2.probabilities);
}

TEST_CASE("stacking two copies of one component changes little") {
    Dataset ds = small_corpus(906);
    ExperimentConfig cfg;
    cfg.seed = 906;

    const BaselineResult header_svm = train_baseline(ds, ModelKind::Svm, Region::Header, cfg);
    // Duplicated-feature stacking: feed the header model's probabilities to
    // both fusion slots by fusing its probability matrix with itself.
    const DataMatrix train_x =
        fused_matrix(header_svm.probs_all, header_svm.probs_all, ds.tags, Partition::Train);
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.tags[i] == Partition::Train) train_labels.push_back(ds.labels[i]);
    const SvmModel stacked = train_multiclass(train_x, train_labels, ds.num_classes(), SvmConfig{});

    const DataMatrix test_x =
        fused_matrix(header_svm.probs_all, header_svm.probs_all, ds.tags, Partition::Test);
    std::vector<int> preds, truth;
    std::size_t t = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        preds.push_back(static_cast<int>(predict_class(stacked, test_x.row(t++))));
        truth.push_back(ds.labels[i]);
    }
    const double stacked_acc = accuracy(preds, truth).accuracy;
    const double component_acc = component_accuracy(header_svm.model, ds);
    const double slack = 1.0 / static_cast<double>(truth.size());  // one test sample
    CHECK(std::abs(stacked_acc - component_acc) <= 0.01 + slack);
}

TEST_CASE("a noise sections channel does not materially hurt a strong header model") {
    Dataset ds = small_corpus(906);
    ExperimentConfig cfg;
    cfg.seed = 906;

    const BaselineResult header_svm = train_baseline(ds, ModelKind::Svm, Region::Header, cfg);

    // Uniform-probability sections channel: pure noise.
    DataMatrix noise(ds.size(), ds.num_classes());
    for (double& v : noise.data) v = 1.0 / static_cast<double>(ds.num_classes());

    const DataMatrix train_x = fused_matrix(header_svm.probs_all, noise, ds.tags, Partition::Train);
    std::vector<int> train_labels;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.tags[i] == Partition::Train) train_labels.push_back(ds.labels[i]);
    const SvmModel stacked = train_multiclass(train_x, train_labels, ds.num_classes(), SvmConfig{});

    const DataMatrix test_x = fused_matrix(header_svm.probs_all, noise, ds.tags, Partition::Test);
    std::vector<int> preds, truth;
    std::size_t t = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        preds.push_back(static_cast<int>(predict_class(stacked, test_x.row(t++))));
        truth.push_back(ds.labels[i]);
    }
    const double stacked_acc = accuracy(preds, truth).accuracy;
    const double header_acc = component_accuracy(header_svm.model, ds);
    const double slack = 1.0 / static_cast<double>(truth.size());  // one test sample
    CHECK(stacked_acc >= header_acc - 0.02 - slack);
}

TEST_CASE("too-short input fails in the parse stage") {
    Dataset ds = small_corpus(906);
    ExperimentConfig cfg;
    cfg.seed = 906;
    const BaselineResult h = train_baseline(ds, ModelKind::Svm, Region::Header, cfg);
    const BaselineResult s = train_baseline(ds, ModelKind::Svm, Region::Sections, cfg);
    FusionSpec spec;
    const FusionModel model = train_fusion(spec, h.model, s.model, ds);

    const std::vector<std::uint8_t> tiny(100, 0x4D);
    try {
        fusion_predict_bytes(model, tiny);
        FAIL("expected FileTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::FileTooShort);
        CHECK(std::string(e.what()).find("stage parse") != std::string::npos);
    }
}

TEST_CASE("train_fusion validates component bindings") {
    Dataset ds = small_corpus(906);
    ExperimentConfig cfg;
    cfg.seed = 906;
    const BaselineResult h = train_baseline(ds, ModelKind::Svm, Region::Header, cfg);
    FusionSpec spec;
    // Header model passed into the sections slot.
    CHECK_THROWS_AS(train_fusion(spec, h.model, h.model, ds), Error);
}
