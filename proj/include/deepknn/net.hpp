#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepknn/dataset.hpp"
#include "deepknn/matrix.hpp"

namespace deepknn {

// Fully-connected ReLU classifier: input -> hidden widths -> raw logits.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    int num_classes = 0;
};

struct DenseNet {
    Architecture arch;
    std::vector<Matrix> weights;              // layer l: out x in
    std::vector<std::vector<double>> biases;  // layer l: out

    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;
};

struct TrainConfig {
    double learning_rate = 0.001;
    std::size_t batch_size = 128;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    // Adam moments
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// A batch of examples with a per-example loss assignment. This is the common
// currency of the training loop and the finite-difference gradient check.
struct LossBatch {
    enum class Row : std::uint8_t {
        Plain,      // cross-entropy against `labels`
        Corrected,  // cross-entropy against `labels` through C^T . softmax
        Soft,       // cross-entropy against the matching row of `soft`
    };

    Matrix features;
    std::vector<int> labels;  // hard labels; may be empty if all rows are Soft
    Matrix soft;              // n x K row-stochastic; may be empty
    std::vector<Row> rows;    // length n
    Matrix correction;        // K x K, rows indexed by true class
};

// Deterministic Glorot-uniform initialization (weights in
// +-sqrt(6/(fan_in+fan_out)), zero biases).
DenseNet init(const Architecture& arch, std::uint64_t seed);

// Runs `epochs` passes of seeded shuffled mini-batches with Adam. Throws
// TrainingDiverged (with the step index) if a batch loss goes non-finite.
void train(DenseNet& net, const Dataset& data, const TrainConfig& cfg);
void train_soft(DenseNet& net, const Matrix& features, const Matrix& soft_labels,
                const TrainConfig& cfg);
// Hard labels; rows flagged in `corrected_mask` (empty = all) train through
// the correction matrix, the rest through plain cross-entropy.
void train_mixed_corrected(DenseNet& net, const Matrix& features,
                           const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& corrected_mask,
                           const Matrix& correction, const TrainConfig& cfg);

std::vector<double> logits(const DenseNet& net, const double* x);
std::vector<double> softmax_probs(const DenseNet& net, const double* x);
int predict(const DenseNet& net, const double* x);

// One row of logits per input row; rows evaluated in parallel.
Matrix logits_batch(const DenseNet& net, const Matrix& features);
double error_rate(const DenseNet& net, const Dataset& data);

// Mean loss over the batch (no update). Used by the gradient check.
double batch_loss(const DenseNet& net, const LossBatch& batch);

struct GradientCheckReport {
    double max_rel_error = 0.0;
    std::size_t parameter_count = 0;
};

// Compares backprop gradients against central finite differences.
GradientCheckReport gradient_check(const DenseNet& net, const LossBatch& batch,
                                   double h = 1e-5);

// Versioned JSON parameter dump.
void save_model(const DenseNet& net, const std::string& path);
DenseNet load_model(const std::string& path);

std::vector<double> stable_softmax(const std::vector<double>& z);

}  // namespace deepknn
