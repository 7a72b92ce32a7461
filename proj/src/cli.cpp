#include "pemux/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pemux/model_io.hpp"
#include "pemux/synth_corpus.hpp"

namespace pemux::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot open spec file: " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open for writing: " + path);
    out << text;
    if (!out) throw Error(Errc::IoError, "failed writing: " + path);
}

Dataset load_split_dataset(const std::string& manifest, std::uint64_t seed) {
    Dataset ds = load_dataset(manifest);
    ds.seed = seed;
    ds.tags = stratified_split(ds.labels, 0.2, experiment_split_seed(seed));
    return ds;
}

// Model predictions are mapped back through label names, so evaluation works
// even if the model was trained on a corpus with a different label order.
double eval_by_names(const std::vector<std::string>& pred_names, const Dataset& ds) {
    std::size_t correct = 0, total = 0;
    std::size_t t = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        if (pred_names[t] == ds.label_names[static_cast<std::size_t>(ds.labels[i])]) ++correct;
        ++t;
        ++total;
    }
    if (total == 0) throw Error(Errc::DataError, "eval: empty test partition");
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

Region parse_region(const std::string& text) {
    if (text == "header") return Region::Header;
    if (text == "sections") return Region::Sections;
    if (text == "entire") return Region::Entire;
    throw Error(Errc::ConfigError, "unknown region '" + text + "' (header|sections|entire)");
}

Modality parse_modality(const std::string& text) {
    if (text == "histogram") return Modality::Histogram;
    if (text == "sequence") return Modality::Sequence;
    if (text == "image") return Modality::Image;
    throw Error(Errc::ConfigError, "unknown modality '" + text + "' (histogram|sequence|image)");
}

SectionsMode parse_sections_mode(const std::string& text) {
    if (text == "offset324") return SectionsMode::Offset324;
    if (text == "entrypoint") return SectionsMode::EntryPoint;
    throw Error(Errc::ConfigError, "unknown sections mode '" + text + "' (offset324|entrypoint)");
}

KernelKind parse_kernel(const std::string& text) {
    if (text == "poly") return KernelKind::Poly;
    if (text == "linear") return KernelKind::Linear;
    if (text == "rbf") return KernelKind::Rbf;
    throw Error(Errc::ConfigError, "unknown kernel '" + text + "' (poly|linear|rbf)");
}

std::string cmd_gen(const GenArgs& args) {
    std::vector<FamilySpec> specs;
    if (args.spec_path.empty()) {
        specs = default_family_specs();
    } else {
        specs = parse_family_specs(read_text_file(args.spec_path));
    }
    generate_corpus(specs, args.seed, args.out_dir);
    return (fs::path(args.out_dir) / "manifest.csv").string();
}

std::size_t cmd_extract(const ExtractArgs& args) {
    const auto rows = load_manifest_csv(args.manifest);

    std::ostringstream out;
    out << "label,region,modality,values\n";
    const char* modality_name = args.modality == Modality::Histogram
                                    ? "histogram"
                                    : (args.modality == Modality::Sequence ? "sequence" : "image");

    char buf[32];
    std::size_t written = 0;
    for (const auto& [path, label] : rows) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::DataError, "cannot open sample: " + path);
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        const PeFile pe = [&] {
            try {
                return parse_pe(bytes);
            } catch (const Error& e) {
                throw Error(e.code(), "sample " + path + ": " + e.what());
            }
        }();

        std::vector<double> values;
        switch (args.modality) {
            case Modality::Histogram:
                values = feature_row_histogram(pe, args.region, args.smode);
                break;
            case Modality::Sequence:
                values = feature_row_sequence(pe, args.region, args.smode, args.seq_len);
                break;
            case Modality::Image:
                values = feature_row_image(pe, args.region, args.smode, args.side);
                break;
        }
        out << label << "," << region_name(args.region) << "," << modality_name;
        for (double v : values) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << "," << buf;
        }
        out << "\n";
        ++written;
    }
    write_text_file(args.out_path, out.str());
    return written;
}

double cmd_train(const TrainArgs& args) {
    Dataset ds = load_split_dataset(args.manifest, args.config.seed);
    const BaselineResult result = train_baseline(ds, args.kind, args.region, args.config);
    if (!args.out_path.empty()) save_region_model(result.model, args.out_path);
    return result.test_accuracy;
}

double cmd_eval(const EvalArgs& args) {
    const AnyModel any = load_model(args.model_path);
    Dataset ds = load_split_dataset(args.manifest, args.seed);
    const std::vector<std::size_t> test_rows = ds.rows_with(Partition::Test);

    if (const RegionModel* rm = std::get_if<RegionModel>(&any)) {
        if (!args.expect_region.empty() && parse_region(args.expect_region) != rm->region)
            throw Error(Errc::ConfigError, "model was trained on region '" +
                                               std::string(region_name(rm->region)) +
                                               "', not '" + args.expect_region + "'");
        if (!args.expect_modality.empty()) {
            const Modality want = parse_modality(args.expect_modality);
            const bool match = (want == Modality::Histogram && rm->kind == ModelKind::Svm) ||
                               (want == Modality::Sequence && rm->kind == ModelKind::Lstm) ||
                               (want == Modality::Image && rm->kind == ModelKind::Cnn);
            if (!match)
                throw Error(Errc::ConfigError,
                            "model kind " + std::string(model_kind_name(rm->kind)) +
                                " does not consume modality '" + args.expect_modality + "'");
        }
        std::vector<std::string> pred_names(test_rows.size());
#pragma omp parallel for schedule(dynamic)
        for (long long t = 0; t < static_cast<long long>(test_rows.size()); ++t) {
            const ProbVector p = rm->probabilities(ds.files[test_rows[static_cast<std::size_t>(t)]]);
            const std::size_t k =
                static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
            pred_names[static_cast<std::size_t>(t)] = rm->labels[k];
        }
        return eval_by_names(pred_names, ds);
    }

    const FusionModel& fm = std::get<FusionModel>(any);
    if (!args.expect_region.empty() || !args.expect_modality.empty())
        throw Error(Errc::ConfigError, "region/modality checks do not apply to fusion bundles");
    std::vector<std::string> pred_names(test_rows.size());
#pragma omp parallel for schedule(dynamic)
    for (long long t = 0; t < static_cast<long long>(test_rows.size()); ++t) {
        const FusionPrediction p = fusion_predict(fm, ds.files[test_rows[static_cast<std::size_t>(t)]]);
        pred_names[static_cast<std::size_t>(t)] = p.label;
    }
    return eval_by_names(pred_names, ds);
}

double cmd_fuse(const FuseArgs& args) {
    const AnyModel h_any = load_model(args.header_model_path);
    const AnyModel s_any = load_model(args.sections_model_path);
    const RegionModel* h = std::get_if<RegionModel>(&h_any);
    const RegionModel* s = std::get_if<RegionModel>(&s_any);
    if (!h || !s)
        throw Error(Errc::ConfigError, "fuse: component model files must be region models");

    Dataset ds = load_split_dataset(args.manifest, args.seed);

    FusionSpec spec;
    spec.header_kind = h->kind;
    spec.sections_kind = s->kind;
    spec.svm = args.svm;
    const FusionModel model = train_fusion(spec, *h, *s, ds);
    if (!args.out_path.empty()) save_fusion_model(model, args.out_path);

    const std::vector<std::size_t> test_rows = ds.rows_with(Partition::Test);
    std::vector<std::string> pred_names(test_rows.size());
#pragma omp parallel for schedule(dynamic)
    for (long long t = 0; t < static_cast<long long>(test_rows.size()); ++t) {
        const FusionPrediction p =
            fusion_predict(model, ds.files[test_rows[static_cast<std::size_t>(t)]]);
        pred_names[static_cast<std::size_t>(t)] = p.label;
    }
    return eval_by_names(pred_names, ds);
}

ExperimentReport cmd_report(const ReportArgs& args) {
    std::string manifest = args.manifest;
    if (!args.gen_dir.empty()) {
        generate_corpus(default_family_specs(), args.config.seed, args.gen_dir);
        manifest = (fs::path(args.gen_dir) / "manifest.csv").string();
    }
    if (manifest.empty())
        throw Error(Errc::ConfigError, "report: either a manifest or a gen dir is required");

    Dataset ds = load_dataset(manifest);
    ExperimentReport report = run_experiment(ds, args.config);

    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    write_text_file((fs::path(args.out_dir) / "report.csv").string(), report_to_csv(report));
    write_text_file((fs::path(args.out_dir) / "report.txt").string(), report_to_text(report));
    return report;
}

}  // namespace pemux::cli
