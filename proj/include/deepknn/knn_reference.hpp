#pragma once

#include <optional>
#include <vector>

#include "deepknn/knn.hpp"
#include "deepknn/matrix.hpp"

namespace deepknn::reference {

// Serial full-sort implementations of the neighbor queries and spread
// statistics. Slow and obvious on purpose: these are the baseline the indexed
// and parallel kernels are checked against, and the serial side of the
// benchmark.

double knn_radius(const Matrix& points, const double* x, std::size_t k,
                  std::optional<std::size_t> exclude = {});

KnnQueryResult knn_query(const Matrix& points, const std::vector<int>& labels,
                         int num_classes, const double* x, std::size_t k,
                         std::optional<std::size_t> exclude = {});

double min_pairwise_distance(const Matrix& points);

double min_knn_spread(const Matrix& points, std::size_t k);

}  // namespace deepknn::reference
