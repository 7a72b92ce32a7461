#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pemux/model_io.hpp"
#include "pemux/pipeline.hpp"
#include "pemux/rng.hpp"
#include "pemux/synth_corpus.hpp"

using namespace pemux;
namespace fs = std::filesystem;

namespace {

struct Fixture {
    Dataset ds;
    fs::path dir;

    Fixture() {
        auto specs = default_family_specs();
        for (auto& s : specs) s.sample_count = 12;
        dir = fs::temp_directory_path() / "pemux_model_io";
        fs::remove_all(dir);
        generate_corpus(specs, 44, dir.string());
        ds = load_dataset((dir / "manifest.csv").string());
        ds.tags = stratified_split(ds.labels, 0.2, experiment_split_seed(44));
    }
    ~Fixture() { fs::remove_all(dir); }
};

ExperimentConfig quick_config() {
    ExperimentConfig cfg;
    cfg.seed = 44;
    cfg.epochs = 2;
    cfg.seq_len_sections = 200;
    cfg.seq_len_entire = 200;
    cfg.lstm_hidden = 6;
    return cfg;
}

void check_same_probabilities(const RegionModel& a, const RegionModel& b,
                              const std::vector<PeFile>& files) {
    for (std::size_t i = 0; i < std::min<std::size_t>(files.size(), 10); ++i) {
        const ProbVector pa = a.probabilities(files[i]);
        const ProbVector pb = b.probabilities(files[i]);
        REQUIRE(pa.size() == pb.size());
        for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k] == pb[k]);
    }
}

}  // namespace

TEST_CASE("region models of every kind survive a save/load round trip") {
    Fixture fx;
    const ExperimentConfig cfg = quick_config();
    const fs::path path = fx.dir / "model.bin";

    for (ModelKind kind : {ModelKind::Svm, ModelKind::Lstm, ModelKind::Cnn}) {
        for (Region region : {Region::Header, Region::Sections}) {
            const BaselineResult trained = train_baseline(fx.ds, kind, region, cfg);
            save_region_model(trained.model, path.string());
            const AnyModel loaded = load_model(path.string());
            REQUIRE(std::holds_alternative<RegionModel>(loaded));
            const RegionModel& rm = std::get<RegionModel>(loaded);
            CHECK(rm.kind == kind);
            CHECK(rm.region == region);
            CHECK(rm.labels == fx.ds.label_names);
            check_same_probabilities(trained.model, rm, fx.ds.files);
        }
    }
}

TEST_CASE("fusion bundles survive a save/load round trip") {
    Fixture fx;
    const ExperimentConfig cfg = quick_config();
    const BaselineResult h = train_baseline(fx.ds, ModelKind::Svm, Region::Header, cfg);
    const BaselineResult s = train_baseline(fx.ds, ModelKind::Cnn, Region::Sections, cfg);

    FusionSpec spec;
    spec.header_kind = ModelKind::Svm;
    spec.sections_kind = ModelKind::Cnn;
    const FusionModel model = train_fusion(spec, h.model, s.model, fx.ds);

    const fs::path path = fx.dir / "fusion.bin";
    save_fusion_model(model, path.string());
    const AnyModel loaded = load_model(path.string());
    REQUIRE(std::holds_alternative<FusionModel>(loaded));
    const FusionModel& fm = std::get<FusionModel>(loaded);

    for (std::size_t i = 0; i < 10; ++i) {
        const FusionPrediction a = fusion_predict(model, fx.ds.files[i]);
        const FusionPrediction b = fusion_predict(fm, fx.ds.files[i]);
        CHECK(a.label == b.label);
        CHECK(a.probabilities == b.probabilities);
    }
}

TEST_CASE("bad files are rejected with typed errors") {
    Fixture fx;
    const fs::path path = fx.dir / "junk.bin";

    {
        std::ofstream out(path, std::ios::binary);
        out << "not a model at all";
    }
    try {
        load_model(path.string());
        FAIL("expected DataError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DataError);
    }

    // Valid model, truncated.
    const ExperimentConfig cfg = quick_config();
    const BaselineResult trained = train_baseline(fx.ds, ModelKind::Svm, Region::Header, cfg);
    const fs::path good = fx.dir / "good.bin";
    save_region_model(trained.model, good.string());
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    try {
        load_model(path.string());
        FAIL("expected DataError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DataError);
    }

    try {
        load_model((fx.dir / "missing.bin").string());
        FAIL("expected IoError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IoError);
    }
}
