#pragma once

#include <functional>
#include <string>
#include <vector>

#include "deepknn/dataset.hpp"
#include "deepknn/net.hpp"

namespace deepknn {

// Corruption matrices are K x K, rows indexed by true class and columns by
// observed class; every row is a probability vector.
void validate_corruption_matrix(const Matrix& c, double tol = 1e-9);
Matrix identity_matrix(std::size_t k);

// Class-posterior oracle used by the estimators: maps a feature row to a
// probability vector over classes. Lets tests inject exact posteriors in
// place of a trained model.
using PosteriorFn = std::function<std::vector<double>(const double*)>;

// Corruption-matrix estimate from trusted data: row t is the mean posterior
// of the noisy-trained model over clean examples with true label t,
// renormalized. Classes absent from the clean set fall back to an identity
// row (with a warning).
Matrix glc_estimate(const PosteriorFn& posterior, const Dataset& clean, int num_classes);
Matrix glc_estimate(const DenseNet& model_on_noisy, const Dataset& clean);

// Corruption-matrix estimate without trusted data: row t is the posterior at
// the class-t prototype, the example the model is most confident about.
Matrix forward_estimate(const PosteriorFn& posterior, const Dataset& noisy, int num_classes);
Matrix forward_estimate(const DenseNet& model_on_noisy, const Dataset& noisy);

// Trains with cross-entropy between observed labels and C^T . softmax(logits).
DenseNet train_corrected(const Dataset& noisy, const Matrix& correction,
                         const Architecture& arch, const TrainConfig& cfg);

// Soft labels: lambda * onehot(observed) + (1-lambda) * posterior of the
// clean-trained model. Rows sum to 1.
Matrix distill_labels(const DenseNet& model_on_clean, const Dataset& noisy, double lambda);

enum class BaselineMethod { Clean, Full, Forward, Glc, Distill };

// Runs one comparison method end to end and returns the trained model.
// Glc and Distill require a nonempty clean set; Forward does not.
DenseNet run_baseline(BaselineMethod method, const Dataset& noisy, const Dataset& clean,
                      const Architecture& arch, const TrainConfig& cfg,
                      double distill_lambda = 0.5);

void export_matrix_csv(const Matrix& m, const std::string& path);

}  // namespace deepknn
