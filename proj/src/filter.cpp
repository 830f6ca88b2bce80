#include "deepknn/filter.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "deepknn/seeds.hpp"

namespace deepknn {

SelectionChoice select_filter_train_set(const Dataset& noisy, const Dataset& clean,
                                        const Architecture& arch,
                                        const TrainConfig& train_cfg,
                                        double subsplit_fraction, std::uint64_t seed) {
    if (clean.size() == 0) return SelectionChoice::Union;
    if (clean.size() < 2) {
        std::fprintf(stderr,
                     "deepknn: clean set too small to hold out a validation split "
                     "(%zu examples); defaulting to the union train set\n",
                     clean.size());
        return SelectionChoice::Union;
    }

    auto [clean_train, clean_val] = subsplit(clean, subsplit_fraction, seed + seeds::kSelection);

    TrainConfig cfg = train_cfg;
    cfg.seed = seed + seeds::kSelection + 1;
    DenseNet clean_only = init(arch, cfg.seed);
    train(clean_only, clean_train, cfg);

    cfg.seed = seed + seeds::kSelection + 2;
    DenseNet with_noisy = init(arch, cfg.seed);
    Dataset union_set = concat(clean_train, noisy);
    union_set.num_classes = arch.num_classes;
    train(with_noisy, union_set, cfg);

    double err_clean = error_rate(clean_only, clean_val);
    double err_union = error_rate(with_noisy, clean_val);
    // Ties go to the union: more data wins absent evidence against it.
    return err_union <= err_clean ? SelectionChoice::Union : SelectionChoice::CleanOnly;
}

FilterOutcome filter(const Dataset& noisy, const Dataset& clean, const DenseNet& model,
                     const FilterConfig& cfg) {
    FilterOutcome out;
    if (noisy.size() == 0) return out;

    Matrix noisy_logits = logits_batch(model, noisy.features);
    Matrix ref_points;
    std::vector<int> ref_labels;
    std::size_t noisy_offset = 0;

    if (cfg.pool == NeighborPool::CleanAndNoisy && clean.size() > 0) {
        Matrix clean_logits = logits_batch(model, clean.features);
        noisy_offset = clean.size();
        ref_points = Matrix(clean.size() + noisy.size(), clean_logits.cols);
        std::copy(clean_logits.data.begin(), clean_logits.data.end(),
                  ref_points.data.begin());
        std::copy(noisy_logits.data.begin(), noisy_logits.data.end(),
                  ref_points.data.begin() + clean_logits.data.size());
        ref_labels = clean.labels;
        ref_labels.insert(ref_labels.end(), noisy.labels.begin(), noisy.labels.end());
    } else {
        ref_points = noisy_logits;
        ref_labels = noisy.labels;
    }

    std::size_t available = ref_points.rows - (cfg.exclude_self ? 1 : 0);
    if (cfg.k < 1 || cfg.k > available)
        throw std::invalid_argument("filter: k exceeds the reference set size");

    KnnIndex index(std::move(ref_points), std::move(ref_labels),
                   model.arch.num_classes, KnnBackend::BruteForce);
    auto results = index.query_batch(noisy_logits, cfg.k, cfg.exclude_self, noisy_offset);

    out.votes.resize(noisy.size());
    out.knn_scores = Matrix(noisy.size(), static_cast<std::size_t>(model.arch.num_classes));
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        out.votes[i] = results[i].prediction;
        std::copy(results[i].scores.begin(), results[i].scores.end(), out.knn_scores.row(i));
        if (results[i].prediction == noisy.labels[i])
            out.kept_indices.push_back(i);
        else
            out.removed_indices.push_back(i);
    }
    return out;
}

PipelineResult run_pipeline(const Dataset& noisy, const Dataset& clean,
                            const Architecture& arch, const TrainConfig& train_cfg,
                            const FilterConfig& filter_cfg) {
    std::uint64_t seed = filter_cfg.seed;
    PipelineResult res;

    if (noisy.size() == 0) {
        if (clean.size() == 0)
            throw std::invalid_argument("run_pipeline: both input sets are empty");
        TrainConfig cfg = train_cfg;
        cfg.seed = seed + seeds::kFinalModel;
        res.final_model = init(arch, cfg.seed);
        train(res.final_model, clean, cfg);
        res.filter_model = res.final_model;
        res.outcome.selection = SelectionChoice::Union;
        return res;
    }

    res.outcome.selection =
        select_filter_train_set(noisy, clean, arch, train_cfg,
                                filter_cfg.selection_subsplit, seed);

    Dataset filter_train = res.outcome.selection == SelectionChoice::Union
                               ? concat(clean, noisy)
                               : clean;
    filter_train.num_classes = arch.num_classes;

    TrainConfig cfg = train_cfg;
    cfg.seed = seed + seeds::kFilterModel;
    res.filter_model = init(arch, cfg.seed);
    train(res.filter_model, filter_train, cfg);

    FilterOutcome outcome = filter(noisy, clean, res.filter_model, filter_cfg);
    outcome.selection = res.outcome.selection;
    res.outcome = std::move(outcome);

    Dataset final_train = concat(clean, subset(noisy, res.outcome.kept_indices));
    final_train.num_classes = arch.num_classes;
    if (final_train.size() == 0)
        throw std::runtime_error(
            "run_pipeline: filtering removed every example and no clean data is available");

    cfg.seed = seed + seeds::kFinalModel;
    res.final_model = init(arch, cfg.seed);
    train(res.final_model, final_train, cfg);
    return res;
}

namespace {

KnnIndex embed_reference(const DenseNet& model, const Dataset& reference) {
    Matrix pts = logits_batch(model, reference.features);
    return KnnIndex(std::move(pts), reference.labels, model.arch.num_classes,
                    KnnBackend::BruteForce);
}

}  // namespace

int knn_classify(const DenseNet& model, const Dataset& reference, std::size_t k,
                 const double* x) {
    KnnIndex index = embed_reference(model, reference);
    std::vector<double> z = logits(model, x);
    return index.query(z.data(), k).prediction;
}

std::vector<int> knn_classify_batch(const DenseNet& model, const Dataset& reference,
                                    std::size_t k, const Matrix& queries) {
    KnnIndex index = embed_reference(model, reference);
    Matrix q = logits_batch(model, queries);
    auto results = index.query_batch(q, k);
    std::vector<int> preds(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) preds[i] = results[i].prediction;
    return preds;
}

void export_filter_audit(const FilterOutcome& outcome, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("export_filter_audit: cannot open " + tmp);
        out << "index,kept";
        for (std::size_t c = 0; c < outcome.knn_scores.cols; ++c) out << ",score_" << c;
        out << "\n";
        std::vector<bool> kept(outcome.knn_scores.rows, false);
        for (std::size_t i : outcome.kept_indices) kept[i] = true;
        char buf[32];
        for (std::size_t i = 0; i < outcome.knn_scores.rows; ++i) {
            out << i << "," << (kept[i] ? 1 : 0);
            for (std::size_t c = 0; c < outcome.knn_scores.cols; ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", outcome.knn_scores(i, c));
                out << "," << buf;
            }
            out << "\n";
        }
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace deepknn
