#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "pemux/cli.hpp"
#include "pemux/parallel.hpp"

namespace {

using pemux::Error;
using pemux::ExperimentReport;

struct CommonSvmFlags {
    std::string kernel = "rbf";
    double c = 10.0;
    double gamma = 0.01;

    pemux::SvmConfig to_config() const {
        return pemux::SvmConfig{pemux::cli::parse_kernel(kernel), c, gamma};
    }
};

void add_svm_flags(CLI::App* app, CommonSvmFlags& flags, const std::string& prefix) {
    app->add_option("--" + prefix + "kernel", flags.kernel, "SVM kernel (poly|linear|rbf)")
        ->capture_default_str();
    app->add_option("--" + prefix + "C", flags.c, "SVM regularization parameter")
        ->capture_default_str();
    app->add_option("--" + prefix + "gamma", flags.gamma, "SVM kernel coefficient")
        ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pemux: multimodal PE malware-family classification experiments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "plain-text config file ([section] key=value)");

    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)")
        ->capture_default_str();

    // Every subcommand takes a mandatory seed; PEMUX_SEED is the fallback.
    auto add_seed = [](CLI::App* cmd, std::uint64_t& seed) {
        cmd->add_option("--seed", seed, "RNG seed (mandatory; no wall-clock seeding)")
            ->envname("PEMUX_SEED")
            ->required();
    };

    // gen
    pemux::cli::GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
    gen->add_option("--spec", gen_args.spec_path, "family spec file (default: bundled 5-family spec)");
    gen->add_option("--out", gen_args.out_dir, "output corpus directory")->required();
    add_seed(gen, gen_args.seed);

    // extract
    pemux::cli::ExtractArgs ex_args;
    std::string ex_region = "header", ex_modality = "histogram", ex_smode = "offset324";
    CLI::App* extract = app.add_subcommand("extract", "dump feature vectors for a corpus");
    extract->add_option("--manifest", ex_args.manifest, "corpus manifest")->required();
    extract->add_option("--region", ex_region, "header|sections|entire")->capture_default_str();
    extract->add_option("--modality", ex_modality, "histogram|sequence|image")
        ->capture_default_str();
    extract->add_option("--out", ex_args.out_path, "output dump file")->required();
    extract->add_option("--seq-len", ex_args.seq_len, "sequence length")->capture_default_str();
    extract->add_option("--side", ex_args.side, "image side (16 or 32)")->capture_default_str();
    extract->add_option("--sections-mode", ex_smode, "offset324|entrypoint")->capture_default_str();

    // train
    pemux::cli::TrainArgs tr_args;
    std::string tr_model = "svm", tr_region = "header", tr_smode = "offset324";
    CommonSvmFlags tr_svm;
    CLI::App* train = app.add_subcommand("train", "train one baseline model");
    train->add_option("--manifest", tr_args.manifest, "corpus manifest")->required();
    train->add_option("--model", tr_model, "svm|lstm|cnn")->capture_default_str();
    train->add_option("--region", tr_region, "header|sections|entire")->capture_default_str();
    train->add_option("--out", tr_args.out_path, "output model file");
    train->add_option("--sections-mode", tr_smode, "offset324|entrypoint")->capture_default_str();
    train->add_option("--seq-len-sections", tr_args.config.seq_len_sections, "LSTM sections length")
        ->capture_default_str();
    train->add_option("--seq-len-entire", tr_args.config.seq_len_entire, "LSTM entire-file length")
        ->capture_default_str();
    train->add_option("--epochs", tr_args.config.epochs, "training epochs")->capture_default_str();
    train->add_option("--batch", tr_args.config.batch, "minibatch size")->capture_default_str();
    add_svm_flags(train, tr_svm, "svm-");
    add_seed(train, tr_args.config.seed);

    // eval
    pemux::cli::EvalArgs ev_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved model on the test partition");
    eval->add_option("--manifest", ev_args.manifest, "corpus manifest")->required();
    eval->add_option("--model", ev_args.model_path, "model file")->required();
    eval->add_option("--region", ev_args.expect_region, "cross-check the model's region");
    eval->add_option("--modality", ev_args.expect_modality, "cross-check the model's modality");
    add_seed(eval, ev_args.seed);

    // fuse
    pemux::cli::FuseArgs fu_args;
    CommonSvmFlags fu_svm;
    CLI::App* fuse = app.add_subcommand("fuse", "train a stacking SVM over two saved models");
    fuse->add_option("--manifest", fu_args.manifest, "corpus manifest")->required();
    fuse->add_option("--header-model", fu_args.header_model_path, "header model file")->required();
    fuse->add_option("--sections-model", fu_args.sections_model_path, "sections model file")
        ->required();
    fuse->add_option("--out", fu_args.out_path, "output fusion bundle");
    add_svm_flags(fuse, fu_svm, "svm-");
    add_seed(fuse, fu_args.seed);

    // report
    pemux::cli::ReportArgs rp_args;
    std::string rp_smode = "offset324";
    CommonSvmFlags rp_svm;
    CommonSvmFlags rp_fusion_svm;
    CLI::App* report = app.add_subcommand("report", "run the full 18-cell experiment grid");
    report->add_option("--manifest", rp_args.manifest, "corpus manifest");
    report->add_option("--gen-default", rp_args.gen_dir,
                       "generate the default corpus into this directory first");
    report->add_option("--out", rp_args.out_dir, "report output directory")->required();
    report->add_option("--sections-mode", rp_smode, "offset324|entrypoint")->capture_default_str();
    report->add_option("--seq-len-sections", rp_args.config.seq_len_sections, "LSTM sections length")
        ->capture_default_str();
    report->add_option("--seq-len-entire", rp_args.config.seq_len_entire, "LSTM entire-file length")
        ->capture_default_str();
    report->add_option("--epochs", rp_args.config.epochs, "training epochs")->capture_default_str();
    report->add_option("--batch", rp_args.config.batch, "minibatch size")->capture_default_str();
    report->add_option("--lstm-hidden", rp_args.config.lstm_hidden, "LSTM hidden units")
        ->capture_default_str();
    report->add_flag("--grid-search", rp_args.config.grid_search_svm,
                     "grid-search SVM hyperparameters on header histograms first");
    report->add_flag("--grid-search-fusion", rp_args.config.grid_search_fusion,
                     "grid-search the stacking SVM per combination");
    add_svm_flags(report, rp_svm, "svm-");
    add_svm_flags(report, rp_fusion_svm, "fusion-svm-");
    add_seed(report, rp_args.config.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    pemux::set_max_threads(threads);

    try {
        if (*gen) {
            const std::string manifest = pemux::cli::cmd_gen(gen_args);
            std::printf("manifest: %s\n", manifest.c_str());
        } else if (*extract) {
            ex_args.region = pemux::cli::parse_region(ex_region);
            ex_args.modality = pemux::cli::parse_modality(ex_modality);
            ex_args.smode = pemux::cli::parse_sections_mode(ex_smode);
            const std::size_t rows = pemux::cli::cmd_extract(ex_args);
            std::printf("wrote %zu feature rows to %s\n", rows, ex_args.out_path.c_str());
        } else if (*train) {
            if (tr_model == "svm") tr_args.kind = pemux::ModelKind::Svm;
            else if (tr_model == "lstm") tr_args.kind = pemux::ModelKind::Lstm;
            else if (tr_model == "cnn") tr_args.kind = pemux::ModelKind::Cnn;
            else throw Error(pemux::Errc::ConfigError, "unknown model '" + tr_model + "'");
            tr_args.region = pemux::cli::parse_region(tr_region);
            tr_args.config.sections_mode = pemux::cli::parse_sections_mode(tr_smode);
            tr_args.config.svm = tr_svm.to_config();
            const double acc = pemux::cli::cmd_train(tr_args);
            std::printf("test accuracy: %.4f\n", acc);
        } else if (*eval) {
            const double acc = pemux::cli::cmd_eval(ev_args);
            std::printf("test accuracy: %.4f\n", acc);
        } else if (*fuse) {
            fu_args.svm = fu_svm.to_config();
            const double acc = pemux::cli::cmd_fuse(fu_args);
            std::printf("fusion test accuracy: %.4f\n", acc);
        } else if (*report) {
            rp_args.config.sections_mode = pemux::cli::parse_sections_mode(rp_smode);
            rp_args.config.svm = rp_svm.to_config();
            rp_args.config.fusion_svm = rp_fusion_svm.to_config();
            const ExperimentReport rep = pemux::cli::cmd_report(rp_args);
            std::fputs(pemux::report_to_text(rep).c_str(), stdout);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", pemux::errc_name(e.code()), e.what());
        return pemux::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}
