#include "pemux/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "pemux/rng.hpp"

namespace pemux {

namespace {

std::map<int, std::vector<std::size_t>> indices_by_class(const std::vector<int>& labels) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    return by_class;
}

}  // namespace

std::vector<Partition> stratified_split(const std::vector<int>& labels, double test_frac,
                                        std::uint64_t seed) {
    auto by_class = indices_by_class(labels);
    for (const auto& [cls, idx] : by_class) {
        if (idx.size() < 2)
            throw Error(Errc::ClassTooSmall, "stratified_split: class " + std::to_string(cls) +
                                                 " has " + std::to_string(idx.size()) + " sample(s)");
    }

    const std::size_t target =
        static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(labels.size()) + 0.5));

    struct ClassPlan {
        int cls;
        std::size_t count;
        double exact;
        std::size_t take;
    };
    std::vector<ClassPlan> plans;
    std::size_t total = 0;
    for (const auto& [cls, idx] : by_class) {
        ClassPlan p;
        p.cls = cls;
        p.count = idx.size();
        p.exact = test_frac * static_cast<double>(idx.size());
        p.take = static_cast<std::size_t>(std::floor(p.exact + 0.5));
        total += p.take;
        plans.push_back(p);
    }

    // Nudge the rounded per-class counts by at most one each to hit the
    // global target, moving the most over/under-allocated class first.
    while (total != target) {
        if (total > target) {
            auto it = std::max_element(plans.begin(), plans.end(), [](const auto& a, const auto& b) {
                const double da = static_cast<double>(a.take) - a.exact;
                const double db = static_cast<double>(b.take) - b.exact;
                if (da != db) return da < db;
                return a.cls > b.cls;  // max_element keeps the earliest on ties this way
            });
            if (it->take == 0) throw Error(Errc::ClassTooSmall, "stratified_split: cannot balance");
            --it->take;
            --total;
        } else {
            auto it = std::min_element(plans.begin(), plans.end(), [](const auto& a, const auto& b) {
                const double da = static_cast<double>(a.take) - a.exact;
                const double db = static_cast<double>(b.take) - b.exact;
                if (da != db) return da < db;
                return a.cls < b.cls;
            });
            if (it->take >= it->count) throw Error(Errc::ClassTooSmall, "stratified_split: cannot balance");
            ++it->take;
            ++total;
        }
    }

    std::vector<Partition> tags(labels.size(), Partition::Train);
    for (const ClassPlan& plan : plans) {
        std::vector<std::size_t> idx = by_class[plan.cls];
        Rng rng(derive_seed(seed, 0x5370 + static_cast<std::uint64_t>(plan.cls)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < plan.take; ++i) tags[idx[i]] = Partition::Test;
    }
    return tags;
}

std::vector<int> kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw Error(Errc::ClassTooSmall, "kfold: k must be >= 2");
    auto by_class = indices_by_class(labels);
    for (const auto& [cls, idx] : by_class) {
        if (idx.size() < static_cast<std::size_t>(k))
            throw Error(Errc::ClassTooSmall, "kfold: class " + std::to_string(cls) + " has " +
                                                 std::to_string(idx.size()) + " samples for k=" +
                                                 std::to_string(k));
    }
    std::vector<int> folds(labels.size(), 0);
    for (auto& [cls, idx] : by_class) {
        Rng rng(derive_seed(seed, 0xF01D + static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            folds[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return folds;
}

std::size_t ConfusionCounts::tp(std::size_t k) const { return at(k, k); }

std::size_t ConfusionCounts::fp(std::size_t k) const {
    std::size_t sum = 0;
    for (std::size_t a = 0; a < num_classes; ++a)
        if (a != k) sum += at(a, k);
    return sum;
}

std::size_t ConfusionCounts::fn(std::size_t k) const {
    std::size_t sum = 0;
    for (std::size_t p = 0; p < num_classes; ++p)
        if (p != k) sum += at(k, p);
    return sum;
}

std::size_t ConfusionCounts::tn(std::size_t k) const { return total() - tp(k) - fp(k) - fn(k); }

std::size_t ConfusionCounts::total() const {
    std::size_t sum = 0;
    for (std::size_t v : matrix) sum += v;
    return sum;
}

AccuracyResult accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw Error(Errc::LengthMismatch, "accuracy: " + std::to_string(predictions.size()) +
                                              " predictions for " + std::to_string(labels.size()) +
                                              " labels");
    int max_class = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        max_class = std::max({max_class, labels[i], predictions[i]});

    AccuracyResult res;
    res.counts.num_classes = static_cast<std::size_t>(max_class) + 1;
    res.counts.matrix.assign(res.counts.num_classes * res.counts.num_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ++res.counts.matrix[static_cast<std::size_t>(labels[i]) * res.counts.num_classes +
                            static_cast<std::size_t>(predictions[i])];
        if (labels[i] == predictions[i]) ++correct;
    }
    res.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
    return res;
}

std::vector<SvmConfig> default_svm_grid() {
    const double cs[] = {0.001, 0.01, 0.1, 1.0, 10.0};
    const double gammas[] = {0.001, 0.01, 0.1, 1.0};
    const KernelKind kernels[] = {KernelKind::Poly, KernelKind::Linear, KernelKind::Rbf};
    std::vector<SvmConfig> grid;
    for (double c : cs)
        for (double g : gammas)
            for (KernelKind k : kernels) grid.push_back(SvmConfig{k, c, g});
    return grid;
}

GridSearchResult grid_search(const std::vector<SvmConfig>& grid, const DataMatrix& x,
                             const std::vector<int>& labels, std::size_t num_classes, int k,
                             std::uint64_t seed) {
    if (grid.empty()) throw Error(Errc::ConfigError, "grid_search: empty grid");
    const std::vector<int> folds = kfold(labels, k, derive_seed(seed, 0x6E1D));

    GridSearchResult result;
    result.table.reserve(grid.size());
    double best_score = -1.0;

    for (const SvmConfig& cfg : grid) {
        GridSearchEntry entry;
        entry.config = cfg;
        try {
            double score_sum = 0.0;
            for (int f = 0; f < k; ++f) {
                DataMatrix train_x;
                train_x.cols = x.cols;
                std::vector<int> train_y;
                std::vector<std::size_t> eval_rows;
                for (std::size_t i = 0; i < labels.size(); ++i) {
                    if (folds[i] == f) {
                        eval_rows.push_back(i);
                    } else {
                        train_x.push_row(x.row(i));
                        train_y.push_back(labels[i]);
                    }
                }
                const SvmModel model = train_multiclass(train_x, train_y, num_classes, cfg);
                std::size_t correct = 0;
                for (std::size_t row : eval_rows)
                    if (predict_class(model, x.row(row)) == static_cast<std::size_t>(labels[row]))
                        ++correct;
                score_sum += static_cast<double>(correct) / static_cast<double>(eval_rows.size());
            }
            entry.mean_cv_accuracy = score_sum / static_cast<double>(k);
        } catch (const Error& e) {
            entry.failed = true;
            entry.error = e.what();
        }
        if (!entry.failed && entry.mean_cv_accuracy > best_score) {
            best_score = entry.mean_cv_accuracy;
            result.best = cfg;
        }
        result.table.push_back(std::move(entry));
    }
    if (best_score < 0.0) throw Error(Errc::DataError, "grid_search: every candidate failed");
    return result;
}

std::uint64_t experiment_split_seed(std::uint64_t seed) { return derive_seed(seed, 0x517); }

std::uint64_t baseline_cell_seed(std::uint64_t seed, ModelKind kind, Region region) {
    return derive_seed(seed, 0xCE11 + 16 * static_cast<std::uint64_t>(kind) +
                                 static_cast<std::uint64_t>(region));
}

namespace {

std::string format_config_echo(const ExperimentConfig& cfg, const Dataset& ds) {
    std::ostringstream os;
    os << "seed=" << cfg.seed << " samples=" << ds.size() << " classes=" << ds.num_classes()
       << " sections_mode=" << sections_mode_name(cfg.sections_mode)
       << " seq_len_sections=" << cfg.seq_len_sections << " seq_len_entire=" << cfg.seq_len_entire
       << " lstm_hidden=" << cfg.lstm_hidden << " epochs=" << cfg.epochs << " batch=" << cfg.batch
       << " val_frac=" << cfg.val_frac << " lr=" << cfg.learning_rate
       << " svm=" << kernel_name(cfg.svm.kernel) << ",C=" << cfg.svm.C << ",gamma=" << cfg.svm.gamma
       << " fusion_svm=" << kernel_name(cfg.fusion_svm.kernel) << ",C=" << cfg.fusion_svm.C
       << ",gamma=" << cfg.fusion_svm.gamma << " grid_search_svm=" << cfg.grid_search_svm
       << " grid_search_fusion=" << cfg.grid_search_fusion;
    return os.str();
}

double eval_on_test(const DataMatrix& probs_all, const Dataset& ds) {
    std::vector<int> preds, truth;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.tags[i] != Partition::Test) continue;
        const auto row = probs_all.row(i);
        preds.push_back(
            static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        truth.push_back(ds.labels[i]);
    }
    return accuracy(preds, truth).accuracy;
}

DataMatrix select_rows(const DataMatrix& all, const std::vector<std::size_t>& rows) {
    DataMatrix out;
    out.cols = all.cols;
    out.data.reserve(rows.size() * all.cols);
    for (std::size_t r : rows) out.push_row(all.row(r));
    return out;
}

}  // namespace

BaselineResult train_baseline(const Dataset& ds, ModelKind kind, Region region,
                              const ExperimentConfig& cfg) {
    if (ds.tags.size() != ds.size())
        throw Error(Errc::DataError, "train_baseline: dataset has no partition tags");

    const std::vector<std::size_t> train_rows = ds.rows_with(Partition::Train);
    std::vector<int> train_labels;
    train_labels.reserve(train_rows.size());
    for (std::size_t r : train_rows) train_labels.push_back(ds.labels[r]);

    const std::size_t seq_len =
        region == Region::Header
            ? kHeaderRegionSize
            : (region == Region::Sections ? cfg.seq_len_sections : cfg.seq_len_entire);
    const std::size_t side = region == Region::Header ? 16 : 32;
    const std::uint64_t cell_seed = baseline_cell_seed(cfg.seed, kind, region);

    BaselineResult out;
    RegionModel rm;
    rm.kind = kind;
    rm.region = region;
    rm.smode = cfg.sections_mode;
    rm.labels = ds.label_names;

    if (kind == ModelKind::Svm) {
        const DataMatrix all = featurize_histogram(ds.files, region, cfg.sections_mode);
        SvmModel model =
            train_multiclass(select_rows(all, train_rows), train_labels, ds.num_classes(), cfg.svm);
        out.probs_all = predict_proba_batch(model, all);
        rm.model = std::move(model);
    } else if (kind == ModelKind::Lstm) {
        const DataMatrix all = featurize_sequence(ds.files, region, cfg.sections_mode, seq_len);
        LstmConfig lc{cfg.lstm_hidden, ds.num_classes(), seq_len};
        TrainOptions to{cfg.epochs, cfg.batch, cfg.val_frac, cell_seed, cfg.learning_rate};
        LstmTrainResult tr = train_lstm(select_rows(all, train_rows), train_labels, lc, to);
        out.probs_all = lstm_predict_batch(tr.weights, all);
        out.log = std::move(tr.log);
        rm.seq_len = seq_len;
        rm.model = std::move(tr.weights);
    } else {
        const DataMatrix all = featurize_image(ds.files, region, cfg.sections_mode, side);
        CnnArch arch{side, 32, 128, ds.num_classes()};
        TrainOptions to{cfg.epochs, cfg.batch, cfg.val_frac, cell_seed, cfg.learning_rate};
        CnnTrainResult tr = train_cnn(select_rows(all, train_rows), train_labels, arch, to);
        out.probs_all = cnn_predict_batch(tr.weights, all);
        out.log = std::move(tr.log);
        rm.model = std::move(tr.weights);
    }
    out.model = std::move(rm);
    out.test_accuracy = eval_on_test(out.probs_all, ds);
    return out;
}

ExperimentReport run_experiment(Dataset& ds, const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();

    ds.seed = cfg.seed;
    ds.tags = stratified_split(ds.labels, 0.2, experiment_split_seed(cfg.seed));

    // Partition integrity: each sample carries exactly one tag by
    // construction; verify counts anyway.
    const std::size_t n_train = ds.rows_with(Partition::Train).size();
    const std::size_t n_test = ds.rows_with(Partition::Test).size();
    if (n_train + n_test != ds.size())
        throw Error(Errc::DataError, "run_experiment: partition tags do not cover the dataset");

    const std::vector<std::size_t> train_rows = ds.rows_with(Partition::Train);
    std::vector<int> train_labels;
    train_labels.reserve(train_rows.size());
    for (std::size_t r : train_rows) train_labels.push_back(ds.labels[r]);

    const Region regions[3] = {Region::Header, Region::Sections, Region::Entire};
    const ModelKind kinds[3] = {ModelKind::Svm, ModelKind::Lstm, ModelKind::Cnn};

    ExperimentConfig effective = cfg;

    ExperimentReport report;
    report.seed = cfg.seed;

    // Optional re-tune of the component SVM hyperparameters on the training
    // partition's header histograms.
    if (cfg.grid_search_svm) {
        const DataMatrix all = featurize_histogram(ds.files, Region::Header, cfg.sections_mode);
        const GridSearchResult gs =
            grid_search(default_svm_grid(), select_rows(all, train_rows), train_labels,
                        ds.num_classes(), 5, derive_seed(cfg.seed, 0x9e1d));
        effective.svm = gs.best;
    }

    struct Outcome {
        bool failed = false;
        std::string error;
        BaselineResult result;
    };
    Outcome outcomes[3][3];  // [kind][region]

    for (int ri = 0; ri < 3; ++ri) {
        for (int ki = 0; ki < 3; ++ki) {
            Outcome& out = outcomes[ki][ri];
            try {
                out.result = train_baseline(ds, kinds[ki], regions[ri], effective);
            } catch (const Error& e) {
                out.failed = true;
                out.error = e.what();
            }
            ReportCell cell;
            cell.header_model = model_kind_name(kinds[ki]);
            cell.sections_model = "none";
            cell.region = region_name(regions[ri]);
            cell.failed = out.failed;
            cell.error = out.error;
            cell.accuracy = out.result.test_accuracy;
            report.cells.push_back(cell);
        }
    }

    // Nine stacking combinations over the header and sections baselines.
    for (int hk = 0; hk < 3; ++hk) {
        for (int sk = 0; sk < 3; ++sk) {
            ReportCell cell;
            cell.header_model = model_kind_name(kinds[hk]);
            cell.sections_model = model_kind_name(kinds[sk]);
            cell.region = "fusion";

            const Outcome& h = outcomes[hk][0];
            const Outcome& s = outcomes[sk][1];
            if (h.failed || s.failed) {
                cell.failed = true;
                cell.error = h.failed ? "header component failed: " + h.error
                                      : "sections component failed: " + s.error;
                report.cells.push_back(cell);
                continue;
            }
            try {
                SvmConfig fusion_cfg = cfg.fusion_svm;
                const DataMatrix fused_train = fused_matrix(h.result.probs_all, s.result.probs_all,
                                                            ds.tags, Partition::Train);
                if (cfg.grid_search_fusion) {
                    const GridSearchResult gs = grid_search(
                        default_svm_grid(), fused_train, train_labels, ds.num_classes(), 5,
                        derive_seed(cfg.seed, 0xF05E + 16 * hk + sk));
                    fusion_cfg = gs.best;
                }
                const SvmModel fusion_model =
                    train_multiclass(fused_train, train_labels, ds.num_classes(), fusion_cfg);

                const DataMatrix fused_test = fused_matrix(h.result.probs_all, s.result.probs_all,
                                                           ds.tags, Partition::Test);
                std::vector<int> preds, truth;
                for (std::size_t i = 0, t = 0; i < ds.size(); ++i) {
                    if (ds.tags[i] != Partition::Test) continue;
                    preds.push_back(static_cast<int>(predict_class(fusion_model, fused_test.row(t))));
                    truth.push_back(ds.labels[i]);
                    ++t;
                }
                cell.accuracy = accuracy(preds, truth).accuracy;
            } catch (const Error& e) {
                cell.failed = true;
                cell.error = e.what();
            }
            report.cells.push_back(cell);
        }
    }

    report.config_echo = format_config_echo(effective, ds);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

std::string report_to_csv(const ExperimentReport& report) {
    std::string out = "header_model,sections_model,region,accuracy,seed\n";
    char buf[64];
    for (const ReportCell& cell : report.cells) {
        out += cell.header_model + "," + cell.sections_model + "," + cell.region + ",";
        if (cell.failed) {
            out += "failed";
        } else {
            std::snprintf(buf, sizeof(buf), "%.4f", cell.accuracy);
            out += buf;
        }
        std::snprintf(buf, sizeof(buf), ",%llu\n", static_cast<unsigned long long>(report.seed));
        out += buf;
    }
    return out;
}

std::string report_to_text(const ExperimentReport& report) {
    std::ostringstream os;
    os << "experiment report (seed " << report.seed << ")\n";
    os << "config: " << report.config_echo << "\n\n";
    os << "  header_model  sections_model  region    accuracy\n";
    os << "  ------------  --------------  --------  --------\n";
    char buf[128];
    for (const ReportCell& cell : report.cells) {
        if (cell.failed) {
            std::snprintf(buf, sizeof(buf), "  %-12s  %-14s  %-8s  FAILED (%s)\n",
                          cell.header_model.c_str(), cell.sections_model.c_str(),
                          cell.region.c_str(), cell.error.c_str());
        } else {
            std::snprintf(buf, sizeof(buf), "  %-12s  %-14s  %-8s  %.4f\n",
                          cell.header_model.c_str(), cell.sections_model.c_str(),
                          cell.region.c_str(), cell.accuracy);
        }
        os << buf;
    }
    os << "\nwall time: " << report.wall_seconds << " s\n";
    return os.str();
}

}  // namespace pemux
