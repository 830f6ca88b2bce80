#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "deepknn/dataset.hpp"
#include "deepknn/errors.hpp"

using namespace deepknn;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& content) {
        static int counter = 0;
        path = (std::filesystem::temp_directory_path() /
                ("deepknn_test_" + std::to_string(counter++) + ".csv"))
                   .string();
        std::ofstream out(path);
        out << content;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

std::multiset<std::vector<double>> row_multiset(const Dataset& d) {
    std::multiset<std::vector<double>> rows;
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::vector<double> row(d.features.row(i), d.features.row(i) + d.dim());
        row.push_back(static_cast<double>(d.labels[i]));
        rows.insert(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("load_csv basic shape and class count") {
    TempCsv f("1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,2\n");
    Dataset d = load_csv(f.path, LabelColumn::by_index(2));
    CHECK(d.size() == 3);
    CHECK(d.dim() == 2);
    CHECK(d.num_classes == 3);
    CHECK(d.features(1, 0) == 3.0);
    CHECK(d.labels[2] == 2);
}

TEST_CASE("load_csv assumes labels span [0, max]") {
    TempCsv f("1.0,5\n2.0,5\n");
    Dataset d = load_csv(f.path, LabelColumn::by_index(1));
    CHECK(d.num_classes == 6);
    Dataset forced = load_csv(f.path, LabelColumn::by_index(1), 9);
    CHECK(forced.num_classes == 9);
}

TEST_CASE("load_csv header and label by name") {
    TempCsv f("x,y,target\n1,2,0\n3,4,1\n");
    Dataset d = load_csv(f.path, LabelColumn::by_name("target"));
    CHECK(d.size() == 2);
    CHECK(d.dim() == 2);
    CHECK(d.labels[1] == 1);
    CHECK_THROWS_AS(load_csv(f.path, LabelColumn::by_name("nope")), CsvError);
}

TEST_CASE("load_csv distinct error kinds") {
    SUBCASE("missing file") {
        try {
            load_csv("/nonexistent/never.csv", LabelColumn::by_index(0));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::MissingFile);
        }
    }
    SUBCASE("NaN cell names row and column") {
        TempCsv f("1.0,0\nNaN,1\n");
        try {
            load_csv(f.path, LabelColumn::by_index(1));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::NonNumericCell);
            CHECK(std::string(e.what()).find("row 2") != std::string::npos);
            CHECK(std::string(e.what()).find("column 1") != std::string::npos);
        }
    }
    SUBCASE("ragged row") {
        TempCsv f("1.0,2.0,0\n1.0,1\n");
        try {
            load_csv(f.path, LabelColumn::by_index(2));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::RaggedRow);
        }
    }
    SUBCASE("non-numeric cell") {
        TempCsv f("1.0,0\nfoo,1\n");
        try {
            load_csv(f.path, LabelColumn::by_index(1));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::NonNumericCell);
        }
    }
    SUBCASE("negative label") {
        TempCsv f("1.0,0\n2.0,-1\n");
        try {
            load_csv(f.path, LabelColumn::by_index(1));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::NegativeLabel);
        }
    }
    SUBCASE("non-integer label") {
        TempCsv f("1.0,0\n2.0,1.5\n");
        try {
            load_csv(f.path, LabelColumn::by_index(1));
            FAIL("expected error");
        } catch (const CsvError& e) {
            CHECK(e.kind() == CsvErrorKind::NonNumericCell);
        }
    }
}

TEST_CASE("load_csv preserves row order") {
    TempCsv f("9,0\n8,1\n7,0\n");
    Dataset d = load_csv(f.path, LabelColumn::by_index(1));
    CHECK(d.features(0, 0) == 9.0);
    CHECK(d.features(1, 0) == 8.0);
    CHECK(d.features(2, 0) == 7.0);
}

namespace {

Dataset make_numbered(std::size_t n) {
    Dataset d;
    d.num_classes = 2;
    d.features = Matrix(n, 2);
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        d.features(i, 0) = static_cast<double>(i);
        d.features(i, 1) = static_cast<double>(2 * i);
        d.labels[i] = static_cast<int>(i % 2);
    }
    return d;
}

}  // namespace

TEST_CASE("split_clean_noisy sizes") {
    Dataset d = make_numbered(100);
    auto [clean, noisy] = split_clean_noisy(d, {0.05, 7});
    CHECK(clean.size() == 5);
    CHECK(noisy.size() == 95);

    auto [c2, n2] = split_clean_noisy(d, {0.0, 7});
    CHECK(c2.size() == 0);
    CHECK(n2.size() == 100);
    CHECK(row_multiset(n2) == row_multiset(d));
}

TEST_CASE("split sizes round half up") {
    Dataset d = make_numbered(10);
    auto [clean, noisy] = split_clean_noisy(d, {0.25, 1});
    CHECK(clean.size() == 3);  // 2.5 rounds up
    CHECK(noisy.size() == 7);
}

TEST_CASE("split_clean_noisy is a deterministic partition") {
    Dataset d = make_numbered(57);
    auto [a1, b1] = split_clean_noisy(d, {0.2, 42});
    auto [a2, b2] = split_clean_noisy(d, {0.2, 42});
    CHECK(a1.features == a2.features);
    CHECK(b1.features == b2.features);
    CHECK(a1.labels == a2.labels);

    // union of the parts is a permutation of the input
    auto both = row_multiset(a1);
    for (const auto& row : row_multiset(b1)) both.insert(row);
    CHECK(both == row_multiset(d));

    auto [a3, b3] = split_clean_noisy(d, {0.2, 43});
    CHECK(a1.features.data != a3.features.data);  // different seed, different split
}

TEST_CASE("subsplit sizes, determinism, errors") {
    Dataset d = make_numbered(10);
    auto [a, b] = subsplit(d, 0.7, 5);
    CHECK(a.size() == 7);
    CHECK(b.size() == 3);

    auto [a2, b2] = subsplit(d, 0.7, 5);
    CHECK(a.features == a2.features);
    CHECK(b.labels == b2.labels);

    Dataset single = make_numbered(1);
    CHECK_THROWS_AS(subsplit(single, 0.5, 0), std::invalid_argument);
}

TEST_CASE("standardize centers and scales columns") {
    Dataset d = make_numbered(50);
    ColumnStats st = column_stats(d);
    Dataset z = standardize(d, st);
    for (std::size_t j = 0; j < z.dim(); ++j) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) m += z.features(i, j);
        m /= static_cast<double>(z.size());
        for (std::size_t i = 0; i < z.size(); ++i)
            v += (z.features(i, j) - m) * (z.features(i, j) - m);
        v /= static_cast<double>(z.size());
        CHECK(std::abs(m) < 1e-12);
        CHECK(std::abs(v - 1.0) < 1e-9);
    }
}

TEST_CASE("concat stacks rows in order") {
    Dataset a = make_numbered(3), b = make_numbered(2);
    Dataset c = concat(a, b);
    CHECK(c.size() == 5);
    CHECK(c.features(3, 0) == 0.0);
    CHECK(c.labels[4] == 1);
}
