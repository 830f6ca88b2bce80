#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepknn/dataset.hpp"
#include "deepknn/knn.hpp"
#include "deepknn/net.hpp"

namespace deepknn {

enum class SelectionChoice { CleanOnly, Union };

// Which examples vote as neighbor references during filtering.
enum class NeighborPool { CleanAndNoisy, NoisyOnly };

struct FilterConfig {
    std::size_t k = 50;
    double selection_subsplit = 0.7;  // clean train/val split inside selection
    bool exclude_self = true;
    NeighborPool pool = NeighborPool::CleanAndNoisy;
    std::uint64_t seed = 0;  // top-level seed; stages derive via seeds.hpp offsets
};

struct FilterOutcome {
    std::vector<std::size_t> kept_indices;     // into the noisy set, ascending
    std::vector<std::size_t> removed_indices;  // complement, ascending
    SelectionChoice selection = SelectionChoice::Union;
    std::vector<int> votes;  // neighbor-vote prediction per noisy example
    Matrix knn_scores;       // |noisy| x K vote fractions, for audit
};

// Decides whether the filtering model trains on the clean data alone or on
// clean plus noisy, by comparing held-out accuracy of the two candidates on a
// split of the clean set. Returns Union when clean is empty or too small to
// split, and on ties.
SelectionChoice select_filter_train_set(const Dataset& noisy, const Dataset& clean,
                                        const Architecture& arch,
                                        const TrainConfig& train_cfg,
                                        double subsplit_fraction, std::uint64_t seed);

// Embeds clean and noisy examples through the model's logit layer and keeps
// each noisy example iff its label matches the k-NN vote of its neighbors.
// Clean examples vote but are never removed.
FilterOutcome filter(const Dataset& noisy, const Dataset& clean, const DenseNet& model,
                     const FilterConfig& cfg);

struct PipelineResult {
    DenseNet final_model;
    DenseNet filter_model;
    FilterOutcome outcome;
};

// Full pipeline: train-set selection, filtering-model training, k-NN
// filtering, final training on kept ∪ clean.
PipelineResult run_pipeline(const Dataset& noisy, const Dataset& clean,
                            const Architecture& arch, const TrainConfig& train_cfg,
                            const FilterConfig& filter_cfg);

// Classifies by k-NN vote in the model's logit space over the reference set.
int knn_classify(const DenseNet& model, const Dataset& reference, std::size_t k,
                 const double* x);
std::vector<int> knn_classify_batch(const DenseNet& model, const Dataset& reference,
                                    std::size_t k, const Matrix& queries);

// CSV audit dump: index, kept flag, per-class vote fractions.
void export_filter_audit(const FilterOutcome& outcome, const std::string& path);

}  // namespace deepknn
