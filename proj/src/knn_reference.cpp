#include "deepknn/knn_reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace deepknn::reference {

namespace {

std::vector<double> all_squared_distances(const Matrix& points, const double* x,
                                          std::optional<std::size_t> exclude) {
    std::vector<double> d2(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i)
        d2[i] = squared_distance(x, points.row(i), points.cols);
    if (exclude) d2[*exclude] = std::numeric_limits<double>::infinity();
    return d2;
}

}  // namespace

double knn_radius(const Matrix& points, const double* x, std::size_t k,
                  std::optional<std::size_t> exclude) {
    std::size_t effective = points.rows - (exclude ? 1 : 0);
    if (k < 1 || k > effective)
        throw std::invalid_argument("reference knn_radius: k exceeds available points");
    auto d2 = all_squared_distances(points, x, exclude);
    std::sort(d2.begin(), d2.end());
    return std::sqrt(d2[k - 1]);
}

KnnQueryResult knn_query(const Matrix& points, const std::vector<int>& labels,
                         int num_classes, const double* x, std::size_t k,
                         std::optional<std::size_t> exclude) {
    std::size_t effective = points.rows - (exclude ? 1 : 0);
    if (k < 1 || k > effective)
        throw std::invalid_argument("reference knn_query: k exceeds available points");
    auto d2 = all_squared_distances(points, x, exclude);
    std::vector<double> sorted = d2;
    std::sort(sorted.begin(), sorted.end());
    double r2 = sorted[k - 1];

    KnnQueryResult res;
    res.radius = std::sqrt(r2);
    for (std::size_t i = 0; i < points.rows; ++i)
        if (d2[i] <= r2) res.neighbor_indices.push_back(i);

    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i : res.neighbor_indices) counts[labels[i]]++;
    double total = static_cast<double>(res.neighbor_indices.size());
    res.scores.resize(num_classes);
    std::size_t best = 0;
    for (int c = 0; c < num_classes; ++c) {
        res.scores[c] = static_cast<double>(counts[c]) / total;
        if (counts[c] > counts[best]) best = c;
    }
    res.prediction = static_cast<int>(best);
    return res;
}

double min_pairwise_distance(const Matrix& points) {
    if (points.rows < 2)
        throw std::invalid_argument("reference min_pairwise_distance: need >= 2 points");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < points.rows; ++i)
        for (std::size_t j = i + 1; j < points.rows; ++j)
            best = std::min(best, squared_distance(points.row(i), points.row(j), points.cols));
    return std::sqrt(best);
}

double min_knn_spread(const Matrix& points, std::size_t k) {
    if (k > points.rows)
        throw std::invalid_argument("reference min_knn_spread: k exceeds |points|");
    if (k < 2) throw std::invalid_argument("reference min_knn_spread: k must be >= 2");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points.rows; ++i) {
        std::vector<double> d2;
        for (std::size_t j = 0; j < points.rows; ++j)
            if (j != i) d2.push_back(squared_distance(points.row(i), points.row(j), points.cols));
        std::sort(d2.begin(), d2.end());
        best = std::min(best, d2[k - 2]);
    }
    return std::sqrt(best);
}

}  // namespace deepknn::reference
