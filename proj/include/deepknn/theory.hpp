#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deepknn/dataset.hpp"
#include "deepknn/matrix.hpp"

namespace deepknn {

// Built-in binary families with closed-form conditional probability, so
// margins, Bayes labels, and Bayes risk are exact.
enum class EtaFamily {
    Ramp,           // uniform on [0,1]^D, eta = 1/2 + c*sign(u)*|u|^alpha, u = x0 - 1/2
    GaussianPair,   // the 2-D pair N((0,-2),I) / N((0,+2),I), boundary x1 = 0
    SeparatedStep,  // uniform on [0,1]^D minus a band of width `gap` around
                    // x0 = 1/2; eta is 0/1 per side, margin 1/2 everywhere
};

struct SyntheticFamilySpec {
    EtaFamily family = EtaFamily::Ramp;
    std::size_t dim = 1;
    double alpha = 1.0;    // Ramp smoothness exponent in (0,1]
    double c_alpha = 1.0;  // Ramp smoothness constant
    double gap = 0.2;      // SeparatedStep band width
};

double eta(const SyntheticFamilySpec& spec, const double* x);
double margin(const SyntheticFamilySpec& spec, const double* x);  // |eta - 1/2|
int bayes_label(const SyntheticFamilySpec& spec, const double* x);
double bayes_risk(const SyntheticFamilySpec& spec);

// Labeled sample: features from the family's marginal, labels Bernoulli(eta).
Dataset sample_family(const SyntheticFamilySpec& spec, std::size_t n, std::uint64_t seed);
Matrix sample_features(const SyntheticFamilySpec& spec, std::size_t n, std::uint64_t seed);

// Ramp-family test points with margin at most `margin_cap`, uniform in the
// boundary offset. Used by the margin-threshold estimator so the agreement
// quantile stays resolved near the decision boundary at every sample size.
Matrix sample_margin_window(const SyntheticFamilySpec& spec, std::size_t n,
                            double margin_cap, std::uint64_t seed);

// Points carrying deliberately wrong labels (never the Bayes label at their
// location), plus the achieved minimum pairwise distance.
struct CorruptedPlacement {
    Matrix points;
    std::vector<int> labels;
    double spread = 0.0;  // S2; 0 when all points coincide
};

// Balanced two-class 2-D Gaussian sample, means (0,-2) and (0,+2).
Dataset gen_gaussian_task(std::size_t n, std::uint64_t seed);

// sqrt(count) x sqrt(count) grid with the given spacing, labels flipped from
// the Gaussian task's Bayes labels. The achieved spread equals the spacing.
CorruptedPlacement gen_grid_corruption(std::size_t count, double width,
                                       double center_x = 0.0, double center_y = 0.0);

// Grid of wrongly-labeled points inside a family's domain (coordinates
// clamped to [margin_lo, margin_hi] box on each axis).
CorruptedPlacement make_grid_placement(const SyntheticFamilySpec& spec, std::size_t count,
                                       double spacing, double center = 0.5);
// `size` coincident wrongly-labeled points at one location.
CorruptedPlacement make_cluster_placement(const SyntheticFamilySpec& spec, std::size_t size,
                                          const std::vector<double>& at);

struct SpreadCurve {
    std::vector<double> widths;
    std::vector<double> mean_accuracy;
    std::vector<double> stderr_accuracy;
};

// For each grid width: train set = clean_n Gaussian samples plus the
// corrupted grid, k-NN accuracy on test_n fresh samples, averaged over seeds.
// `use_correct_labels` replaces the planted labels with the Bayes labels.
SpreadCurve spread_experiment(const std::vector<double>& widths, std::size_t clean_n,
                              std::size_t test_n, std::size_t k,
                              const std::vector<std::uint64_t>& seeds,
                              std::size_t corrupted_count = 100,
                              bool use_correct_labels = false);

struct CleanSamplesCurve {
    std::vector<double> widths;
    std::vector<std::size_t> required_n;  // smallest grid multiple reaching the target
    std::vector<bool> reachable;
};

// Smallest clean-sample count (on a grid of `step`) whose seed-averaged
// accuracy reaches `target_acc`, per width.
CleanSamplesCurve clean_samples_to_target(const std::vector<double>& widths,
                                          double target_acc, std::size_t test_n,
                                          std::size_t k,
                                          const std::vector<std::uint64_t>& seeds,
                                          std::size_t step = 10, std::size_t max_n = 2000,
                                          std::size_t corrupted_count = 100);

struct AgreementReport {
    std::size_t tested = 0;
    std::size_t violations = 0;
    double violation_fraction = 0.0;
    double max_knn_radius = 0.0;  // over the tested points
};

// Checks, over test points with margin >= delta, that the k-NN prediction on
// the sample (n family draws plus the placement) equals the Bayes label.
// Throws if no test point clears the margin.
AgreementReport margin_agreement_check(const SyntheticFamilySpec& spec, std::size_t n, std::size_t k,
                              const CorruptedPlacement* placement, const Matrix& test_points,
                              double delta, std::uint64_t seed);

struct RateCurve {
    std::vector<std::size_t> n_values;
    std::vector<double> values;         // seed-averaged margin thresholds or excess risks
    std::vector<double> stderr_values;  // seed standard errors
    double slope = 0.0;                 // log-log least squares
    bool nonincreasing_up_to_one_inversion = true;
};

// Smallest margin threshold at which the agreement criterion holds on at
// least `agreement` of the threshold's test points, per n, with
// k_n = round(k_coeff * n^{2 alpha/(2 alpha + D)}).
RateCurve rate_experiment(const SyntheticFamilySpec& spec,
                          const std::vector<std::size_t>& n_list, double k_coeff,
                          const std::vector<std::uint64_t>& seeds,
                          std::size_t test_pool = 4000, double agreement = 0.99,
                          const CorruptedPlacement* placement = nullptr);

// Empirical excess risk (exact conditional form, E|2 eta - 1| over the
// disagreement region) of the k-NN classifier, per n.
RateCurve excess_risk_experiment(const SyntheticFamilySpec& spec,
                                 const std::vector<std::size_t>& n_list, double k_coeff,
                                 const std::vector<std::uint64_t>& seeds,
                                 std::size_t test_pool = 20000,
                                 const CorruptedPlacement* placement = nullptr);

// Gaussian blobs on a circle of the given radius; labels cycle through the
// classes. The desk-scale stand-in for a multiclass dataset.
Dataset gen_blobs(int classes, std::size_t n, std::size_t dim, double radius, double sigma,
                  std::uint64_t seed);

}  // namespace deepknn
