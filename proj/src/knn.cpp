#include "deepknn/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace deepknn {

double squared_distance(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

KnnIndex::KnnIndex(Matrix points, std::vector<int> labels, int num_classes,
                   KnnBackend backend)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      num_classes_(num_classes),
      backend_(backend) {
    if (points_.rows == 0) throw std::invalid_argument("knn: empty point set");
    if (labels_.size() != points_.rows)
        throw std::invalid_argument("knn: label count does not match point count");
    if (num_classes_ < 1) throw std::invalid_argument("knn: num_classes must be positive");
    for (int l : labels_)
        if (l < 0 || l >= num_classes_)
            throw std::invalid_argument("knn: label out of range");
    if (backend_ == KnnBackend::KdTree) build_tree();
}

KnnIndex build_index(Matrix points, std::vector<int> labels, int num_classes,
                     KnnBackend backend) {
    return KnnIndex(std::move(points), std::move(labels), num_classes, backend);
}

namespace {
constexpr std::size_t kLeafSize = 16;
}

void KnnIndex::build_tree() {
    std::size_t n = points_.rows, d = points_.cols;
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(2 * (n / kLeafSize + 2));
    std::vector<double> mins(d), maxs(d);
    for (std::size_t j = 0; j < d; ++j) {
        mins[j] = std::numeric_limits<double>::infinity();
        maxs[j] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            mins[j] = std::min(mins[j], points_(i, j));
            maxs[j] = std::max(maxs[j], points_(i, j));
        }
    root_ = build_node(0, n, mins, maxs);
}

int KnnIndex::build_node(std::size_t begin, std::size_t end, std::vector<double>& mins,
                         std::vector<double>& maxs) {
    int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    nodes_[id].box_min = mins;
    nodes_[id].box_max = maxs;

    std::size_t d = points_.cols;
    if (end - begin <= kLeafSize) return id;

    // Split on the widest axis at the median point.
    int axis = 0;
    double width = -1.0;
    for (std::size_t j = 0; j < d; ++j) {
        double w = maxs[j] - mins[j];
        if (w > width) {
            width = w;
            axis = static_cast<int>(j);
        }
    }
    if (width <= 0.0) return id;  // all points identical, keep as leaf

    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                         return points_(a, axis) < points_(b, axis);
                     });
    double split = points_(order_[mid], axis);

    // Recompute tight child boxes.
    auto child_box = [&](std::size_t b, std::size_t e, std::vector<double>& lo,
                         std::vector<double>& hi) {
        lo.assign(d, std::numeric_limits<double>::infinity());
        hi.assign(d, -std::numeric_limits<double>::infinity());
        for (std::size_t i = b; i < e; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                lo[j] = std::min(lo[j], points_(order_[i], j));
                hi[j] = std::max(hi[j], points_(order_[i], j));
            }
    };
    std::vector<double> lmin, lmax, rmin, rmax;
    child_box(begin, mid, lmin, lmax);
    child_box(mid, end, rmin, rmax);

    nodes_[id].axis = axis;
    nodes_[id].split = split;
    int left = build_node(begin, mid, lmin, lmax);
    int right = build_node(mid, end, rmin, rmax);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

namespace {

double box_squared_distance(const double* x, const std::vector<double>& lo,
                            const std::vector<double>& hi) {
    double s = 0.0;
    for (std::size_t j = 0; j < lo.size(); ++j) {
        double diff = 0.0;
        if (x[j] < lo[j])
            diff = lo[j] - x[j];
        else if (x[j] > hi[j])
            diff = x[j] - hi[j];
        s += diff * diff;
    }
    return s;
}

}  // namespace

double KnnIndex::brute_squared_radius(const double* x, std::size_t k,
                                      std::optional<std::size_t> exclude) const {
    std::size_t n = points_.rows, d = points_.cols;
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x, points_.row(i), d);
    if (exclude) d2[*exclude] = std::numeric_limits<double>::infinity();
    std::nth_element(d2.begin(), d2.begin() + (k - 1), d2.end());
    return d2[k - 1];
}

double KnnIndex::kd_squared_radius(const double* x, std::size_t k,
                                   std::optional<std::size_t> exclude) const {
    // Max-heap of the k smallest squared distances seen so far.
    std::priority_queue<double> heap;
    std::size_t d = points_.cols;

    auto visit = [&](auto&& self, int id) -> void {
        const detail::KdNode& node = nodes_[id];
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                std::size_t p = order_[i];
                if (exclude && p == *exclude) continue;
                double d2 = squared_distance(x, points_.row(p), d);
                if (heap.size() < k) {
                    heap.push(d2);
                } else if (d2 < heap.top()) {
                    heap.pop();
                    heap.push(d2);
                }
            }
            return;
        }
        int first = node.left, second = node.right;
        if (x[node.axis] > node.split) std::swap(first, second);
        auto prune = [&](int child) {
            if (heap.size() < k) return false;
            return box_squared_distance(x, nodes_[child].box_min, nodes_[child].box_max) >
                   heap.top();
        };
        if (!prune(first)) self(self, first);
        if (!prune(second)) self(self, second);
    };
    visit(visit, root_);
    return heap.top();
}

double KnnIndex::squared_radius(const double* x, std::size_t k,
                                std::optional<std::size_t> exclude) const {
    std::size_t effective = points_.rows - (exclude ? 1 : 0);
    if (k < 1 || k > effective)
        throw std::invalid_argument("knn: k exceeds available points");
    if (backend_ == KnnBackend::KdTree) return kd_squared_radius(x, k, exclude);
    return brute_squared_radius(x, k, exclude);
}

void KnnIndex::collect_within(const double* x, double r2, std::optional<std::size_t> exclude,
                              std::vector<std::size_t>& out) const {
    std::size_t n = points_.rows, d = points_.cols;
    if (backend_ == KnnBackend::BruteForce) {
        for (std::size_t i = 0; i < n; ++i) {
            if (exclude && i == *exclude) continue;
            if (squared_distance(x, points_.row(i), d) <= r2) out.push_back(i);
        }
        return;
    }
    auto visit = [&](auto&& self, int id) -> void {
        const detail::KdNode& node = nodes_[id];
        if (box_squared_distance(x, node.box_min, node.box_max) > r2) return;
        if (node.left < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                std::size_t p = order_[i];
                if (exclude && p == *exclude) continue;
                if (squared_distance(x, points_.row(p), d) <= r2) out.push_back(p);
            }
            return;
        }
        self(self, node.left);
        self(self, node.right);
    };
    visit(visit, root_);
    std::sort(out.begin(), out.end());
}

double KnnIndex::radius(const double* x, std::size_t k,
                        std::optional<std::size_t> exclude) const {
    return std::sqrt(squared_radius(x, k, exclude));
}

KnnQueryResult KnnIndex::query(const double* x, std::size_t k,
                               std::optional<std::size_t> exclude) const {
    double r2 = squared_radius(x, k, exclude);
    KnnQueryResult res;
    res.radius = std::sqrt(r2);
    collect_within(x, r2, exclude, res.neighbor_indices);

    std::vector<std::size_t> counts(num_classes_, 0);
    for (std::size_t i : res.neighbor_indices) counts[labels_[i]]++;
    double total = static_cast<double>(res.neighbor_indices.size());
    res.scores.resize(num_classes_);
    std::size_t best = 0;
    for (int c = 0; c < num_classes_; ++c) {
        res.scores[c] = static_cast<double>(counts[c]) / total;
        if (counts[c] > counts[best]) best = c;
    }
    res.prediction = static_cast<int>(best);
    return res;
}

std::vector<KnnQueryResult> KnnIndex::query_batch(const Matrix& queries, std::size_t k,
                                                  bool exclude_row_identity,
                                                  std::size_t exclude_offset) const {
    if (queries.cols != points_.cols)
        throw std::invalid_argument("knn: query dimension mismatch");
    std::vector<KnnQueryResult> out(queries.rows);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(queries.rows); ++i) {
        std::optional<std::size_t> excl;
        if (exclude_row_identity) excl = exclude_offset + static_cast<std::size_t>(i);
        out[i] = query(queries.row(i), k, excl);
    }
    return out;
}

double min_pairwise_distance(const Matrix& points) {
    std::size_t n = points.rows, d = points.cols;
    if (n < 2) throw std::invalid_argument("min_pairwise_distance: need >= 2 points");
    double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(dynamic, 8) reduction(min : best)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n) - 1; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = squared_distance(points.row(i), points.row(j), d);
            if (d2 < best) best = d2;
        }
    }
    return std::sqrt(best);
}

double min_knn_spread(const Matrix& points, std::size_t k) {
    // Rank k-1 among a point's n-1 others requires k <= n.
    std::size_t n = points.rows, d = points.cols;
    if (k > n) throw std::invalid_argument("min_knn_spread: k exceeds |points|");
    if (k < 2) throw std::invalid_argument("min_knn_spread: k must be >= 2");
    double best = std::numeric_limits<double>::infinity();
#pragma omp parallel for schedule(dynamic, 8) reduction(min : best)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        std::vector<double> d2;
        d2.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == static_cast<std::size_t>(i)) continue;
            d2.push_back(squared_distance(points.row(i), points.row(j), d));
        }
        // The point itself occupies rank 0, so its k-NN radius within the set
        // is the (k-1)-th nearest other point.
        std::nth_element(d2.begin(), d2.begin() + (k - 2), d2.end());
        if (d2[k - 2] < best) best = d2[k - 2];
    }
    return std::sqrt(best);
}

}  // namespace deepknn
