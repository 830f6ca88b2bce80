#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "deepknn/matrix.hpp"

namespace deepknn {

// Feature matrix plus integer labels in [0, num_classes). Immutable by
// convention after construction; everything downstream shares by const ref.
struct Dataset {
    Matrix features;          // n x d
    std::vector<int> labels;  // length n
    int num_classes = 0;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }

    // Throws std::invalid_argument on shape mismatch, out-of-range labels,
    // or non-finite features.
    void validate() const;
};

struct SplitSpec {
    double clean_fraction = 0.05;
    std::uint64_t seed = 0;
};

// Label column selector: a 0-based index, or a header name.
struct LabelColumn {
    static LabelColumn by_index(int i) { return {i, {}}; }
    static LabelColumn by_name(std::string n) { return {-1, std::move(n)}; }
    // Parses an integer as an index, anything else as a name.
    static LabelColumn parse(const std::string& s);

    int index = -1;
    std::string name;
};

// Comma-separated values, optional header row, no quoting. Labels must parse
// as nonnegative integers; num_classes = 1 + max label unless overridden.
Dataset load_csv(const std::string& path, const LabelColumn& label,
                 std::optional<int> num_classes_override = {});

// Deterministic partition into (clean, noisy) with |clean| =
// round-half-up(clean_fraction * n). Row order within each part follows the
// input order.
std::pair<Dataset, Dataset> split_clean_noisy(const Dataset& data, const SplitSpec& spec);

// Deterministic partition with |a| = round-half-up(fraction * n).
// Requires n >= 2 and 0 < fraction < 1.
std::pair<Dataset, Dataset> subsplit(const Dataset& data, double fraction, std::uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);
Dataset concat(const Dataset& a, const Dataset& b);

struct ColumnStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // zero-variance columns are kept at scale 1
};

ColumnStats column_stats(const Dataset& data);
Dataset standardize(const Dataset& data, const ColumnStats& stats);

std::size_t round_half_up(double x);

}  // namespace deepknn
