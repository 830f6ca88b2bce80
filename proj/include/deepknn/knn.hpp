#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "deepknn/matrix.hpp"

namespace deepknn {

enum class KnnBackend { BruteForce, KdTree };

// Result of one neighbor query. The neighbor set contains every indexed point
// within the query radius, so distance ties at the radius are all included and
// the set can exceed k.
struct KnnQueryResult {
    double radius = 0.0;
    std::vector<std::size_t> neighbor_indices;  // ascending
    std::vector<double> scores;                 // per-class vote fractions, sum to 1
    int prediction = 0;                         // argmax score, ties -> lowest class
};

namespace detail {
struct KdNode {
    int left = -1, right = -1;  // children, -1 for leaves
    int axis = 0;
    double split = 0.0;
    std::size_t begin = 0, end = 0;  // leaf point range in `order`
    std::vector<double> box_min, box_max;
};
}  // namespace detail

// Immutable snapshot of embedded points and their labels under the Euclidean
// metric. Queries are read-only and safe to run concurrently.
class KnnIndex {
public:
    KnnIndex(Matrix points, std::vector<int> labels, int num_classes,
             KnnBackend backend);

    std::size_t size() const { return points_.rows; }
    std::size_t dim() const { return points_.cols; }
    int num_classes() const { return num_classes_; }
    KnnBackend backend() const { return backend_; }
    const Matrix& points() const { return points_; }
    const std::vector<int>& labels() const { return labels_; }

    // Distance to the k-th nearest indexed point (smallest radius whose closed
    // ball holds >= k points). `exclude` removes one indexed point from
    // consideration, for self-queries.
    double radius(const double* x, std::size_t k,
                  std::optional<std::size_t> exclude = {}) const;

    KnnQueryResult query(const double* x, std::size_t k,
                         std::optional<std::size_t> exclude = {}) const;

    // One query per row of `queries`; runs the rows in parallel.
    // `exclude_row_index` treats query row i as indexed point (offset + i) and
    // excludes it from its own neighbor set.
    std::vector<KnnQueryResult> query_batch(const Matrix& queries, std::size_t k,
                                            bool exclude_row_identity = false,
                                            std::size_t exclude_offset = 0) const;

private:
    double squared_radius(const double* x, std::size_t k,
                          std::optional<std::size_t> exclude) const;
    double brute_squared_radius(const double* x, std::size_t k,
                                std::optional<std::size_t> exclude) const;
    double kd_squared_radius(const double* x, std::size_t k,
                             std::optional<std::size_t> exclude) const;
    void collect_within(const double* x, double r2, std::optional<std::size_t> exclude,
                        std::vector<std::size_t>& out) const;
    void build_tree();
    int build_node(std::size_t begin, std::size_t end, std::vector<double>& mins,
                   std::vector<double>& maxs);

    Matrix points_;
    std::vector<int> labels_;
    int num_classes_ = 0;
    KnnBackend backend_ = KnnBackend::BruteForce;
    std::vector<detail::KdNode> nodes_;
    std::vector<std::size_t> order_;
    int root_ = -1;
};

KnnIndex build_index(Matrix points, std::vector<int> labels, int num_classes,
                     KnnBackend backend = KnnBackend::BruteForce);

double squared_distance(const double* a, const double* b, std::size_t d);

// Smallest distance over distinct unordered pairs (S2). Parallel scan;
// requires >= 2 points.
double min_pairwise_distance(const Matrix& points);

// Smallest within-set k-NN radius over the set's own members, where a point's
// k-NN radius within the set counts the point itself as rank 0, so rank k-1
// is the (k-1)-th nearest *other* point. With k = 2 this equals
// min_pairwise_distance. Requires k < |points|.
double min_knn_spread(const Matrix& points, std::size_t k);

}  // namespace deepknn
