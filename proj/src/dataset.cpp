#include "deepknn/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "deepknn/errors.hpp"
#include "deepknn/rng.hpp"

namespace deepknn {

void Dataset::validate() const {
    if (features.rows == 0 || features.cols == 0)
        throw std::invalid_argument("dataset: empty feature matrix");
    if (labels.size() != features.rows)
        throw std::invalid_argument("dataset: label/feature length mismatch");
    if (num_classes < 1)
        throw std::invalid_argument("dataset: num_classes must be positive");
    for (int l : labels)
        if (l < 0 || l >= num_classes)
            throw std::invalid_argument("dataset: label out of range");
    for (double v : features.data)
        if (!std::isfinite(v))
            throw std::invalid_argument("dataset: non-finite feature");
}

std::size_t round_half_up(double x) {
    return static_cast<std::size_t>(std::floor(x + 0.5));
}

LabelColumn LabelColumn::parse(const std::string& s) {
    int idx = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
    if (ec == std::errc{} && p == s.data() + s.size()) return by_index(idx);
    return by_name(s);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& cell, double& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && p == t.data() + t.size() && std::isfinite(out);
}

bool parse_int(const std::string& cell, long& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && p == t.data() + t.size();
}

std::string cell_pos(std::size_t row1, std::size_t col1) {
    std::ostringstream os;
    os << "row " << row1 << ", column " << col1;
    return os.str();
}

}  // namespace

Dataset load_csv(const std::string& path, const LabelColumn& label,
                 std::optional<int> num_classes_override) {
    std::ifstream in(path);
    if (!in)
        throw CsvError(CsvErrorKind::MissingFile, "cannot open file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        rows.push_back(split_line(line));
    }
    if (rows.empty())
        throw CsvError(CsvErrorKind::RaggedRow, "empty file: " + path);

    // Header detection: a first row with any non-numeric cell is a header.
    bool has_header = false;
    for (const auto& cell : rows[0]) {
        double v;
        if (!parse_double(cell, v)) {
            has_header = true;
            break;
        }
    }

    std::size_t ncols = rows[0].size();
    int label_idx = label.index;
    if (label.index < 0) {
        if (!has_header)
            throw CsvError(CsvErrorKind::BadLabelColumn,
                           "label column named '" + label.name + "' but file has no header");
        label_idx = -1;
        for (std::size_t j = 0; j < ncols; ++j)
            if (trim(rows[0][j]) == label.name) label_idx = static_cast<int>(j);
        if (label_idx < 0)
            throw CsvError(CsvErrorKind::BadLabelColumn,
                           "no column named '" + label.name + "'");
    }
    if (label_idx < 0 || static_cast<std::size_t>(label_idx) >= ncols)
        throw CsvError(CsvErrorKind::BadLabelColumn,
                       "label column index out of range: " + std::to_string(label_idx));
    if (ncols < 2)
        throw CsvError(CsvErrorKind::BadLabelColumn, "need at least one feature column");

    std::size_t first_data = has_header ? 1 : 0;
    std::size_t n = rows.size() - first_data;
    if (n == 0)
        throw CsvError(CsvErrorKind::RaggedRow, "no data rows in " + path);

    Dataset ds;
    ds.features = Matrix(n, ncols - 1);
    ds.labels.resize(n);
    long max_label = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const auto& cells = rows[first_data + i];
        std::size_t row1 = first_data + i + 1;  // 1-based, counting the header
        if (cells.size() != ncols)
            throw CsvError(CsvErrorKind::RaggedRow,
                           "row " + std::to_string(row1) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(ncols));
        std::size_t fj = 0;
        for (std::size_t j = 0; j < ncols; ++j) {
            if (static_cast<int>(j) == label_idx) {
                long l;
                if (!parse_int(cells[j], l))
                    throw CsvError(CsvErrorKind::NonNumericCell,
                                   "label does not parse as an integer at " + cell_pos(row1, j + 1));
                if (l < 0)
                    throw CsvError(CsvErrorKind::NegativeLabel,
                                   "negative label at " + cell_pos(row1, j + 1));
                ds.labels[i] = static_cast<int>(l);
                max_label = std::max(max_label, l);
            } else {
                double v;
                if (!parse_double(cells[j], v))
                    throw CsvError(CsvErrorKind::NonNumericCell,
                                   "cell does not parse as a finite number at " + cell_pos(row1, j + 1));
                ds.features(i, fj++) = v;
            }
        }
    }

    ds.num_classes = num_classes_override
                         ? *num_classes_override
                         : static_cast<int>(max_label) + 1;
    ds.validate();
    return ds;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
    Dataset out;
    out.num_classes = data.num_classes;
    out.features = Matrix(indices.size(), data.dim());
    out.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = data.features.row(indices[i]);
        std::copy(src, src + data.dim(), out.features.row(i));
        out.labels[i] = data.labels[indices[i]];
    }
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.size() == 0) return b;
    if (b.size() == 0) return a;
    if (a.dim() != b.dim())
        throw std::invalid_argument("concat: dimension mismatch");
    Dataset out;
    out.num_classes = std::max(a.num_classes, b.num_classes);
    out.features = Matrix(a.size() + b.size(), a.dim());
    std::copy(a.features.data.begin(), a.features.data.end(), out.features.data.begin());
    std::copy(b.features.data.begin(), b.features.data.end(),
              out.features.data.begin() + a.features.data.size());
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

namespace {

std::pair<Dataset, Dataset> split_by_count(const Dataset& data, std::size_t na,
                                           std::uint64_t seed) {
    Rng rng(seed);
    auto perm = rng.permutation(data.size());
    std::vector<std::size_t> ia(perm.begin(), perm.begin() + na);
    std::vector<std::size_t> ib(perm.begin() + na, perm.end());
    std::sort(ia.begin(), ia.end());
    std::sort(ib.begin(), ib.end());
    return {subset(data, ia), subset(data, ib)};
}

}  // namespace

std::pair<Dataset, Dataset> split_clean_noisy(const Dataset& data, const SplitSpec& spec) {
    if (spec.clean_fraction < 0.0 || spec.clean_fraction > 1.0)
        throw std::invalid_argument("split_clean_noisy: clean_fraction outside [0,1]");
    std::size_t nc = std::min(data.size(), round_half_up(spec.clean_fraction * data.size()));
    return split_by_count(data, nc, spec.seed);
}

std::pair<Dataset, Dataset> subsplit(const Dataset& data, double fraction, std::uint64_t seed) {
    if (data.size() < 2)
        throw std::invalid_argument("subsplit: need at least 2 rows");
    if (fraction <= 0.0 || fraction >= 1.0)
        throw std::invalid_argument("subsplit: fraction must be in (0,1)");
    std::size_t na = round_half_up(fraction * data.size());
    na = std::max<std::size_t>(1, std::min(na, data.size() - 1));
    return split_by_count(data, na, seed);
}

ColumnStats column_stats(const Dataset& data) {
    std::size_t n = data.size(), d = data.dim();
    ColumnStats st;
    st.mean.assign(d, 0.0);
    st.stddev.assign(d, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) st.mean[j] += data.features(i, j);
    for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(n);
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double c = data.features(i, j) - st.mean[j];
            var[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) {
        double s = std::sqrt(var[j] / static_cast<double>(n));
        st.stddev[j] = s > 0.0 ? s : 1.0;
    }
    return st;
}

Dataset standardize(const Dataset& data, const ColumnStats& stats) {
    Dataset out = data;
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.dim(); ++j)
            out.features(i, j) = (out.features(i, j) - stats.mean[j]) / stats.stddev[j];
    return out;
}

}  // namespace deepknn
