#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepknn/dataset.hpp"
#include "deepknn/filter.hpp"
#include "deepknn/net.hpp"
#include "deepknn/noise.hpp"

namespace deepknn {

enum class Method { Clean, Full, Forward, Glc, Distill, KnnFilter, KnnClassify };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct BlobSpec {
    int classes = 10;
    std::size_t n = 5000;
    std::size_t dim = 2;
    double radius = 6.0;
    double sigma = 1.0;
    std::size_t test_n = 2000;
};

struct DatasetConfig {
    enum class Kind { Csv, Blobs, TwoGaussians };
    Kind kind = Kind::Blobs;
    // csv
    std::string csv_path;
    std::string label_col = "0";  // index or header name
    bool standardize = false;
    double test_fraction = 0.2;
    std::optional<int> num_classes;  // default: 1 + max observed label
    // synthetic
    BlobSpec blobs;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    double clean_fraction = 0.05;
    NoiseScheme scheme = NoiseScheme::Uniform;
    std::vector<int> permutation;  // empty = circular (HardFlip only)
    bool exact_count = false;
    std::vector<double> rates;  // default: 11 uniform points on [0,1]
    std::vector<Method> methods;
    std::vector<std::size_t> hidden{100};
    TrainConfig train;  // epochs defaults to 100
    long knn_k = -1;    // -1 = auto: 50 below 10^4 training examples, else 500
    bool exclude_self = true;
    NeighborPool pool = NeighborPool::CleanAndNoisy;
    double distill_lambda = 0.5;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "results";
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
nlohmann::json experiment_config_json(const ExperimentConfig& cfg);

struct SweepCell {
    bool ok = false;
    double error = 0.0;
    std::string message;
};

struct SweepResult {
    std::vector<Method> methods;
    std::vector<double> rates;
    std::vector<std::uint64_t> seeds;
    // indexed [method][rate][seed]
    std::vector<std::vector<std::vector<SweepCell>>> cells;
    // aggregates, valid where complete[m][r]
    std::vector<std::vector<double>> mean_error;
    std::vector<std::vector<double>> stderr_error;
    std::vector<std::vector<bool>> complete;
    std::vector<std::optional<double>> auc;  // per method; absent if incomplete
    bool all_complete = true;
};

// Runs every (method, rate, seed) cell; failed cells are recorded as missing
// and never poison the rest.
SweepResult run_sweep(const ExperimentConfig& cfg);

// Area under the error-vs-rate curve: the plain sum of the per-rate mean
// errors over the grid.
double compute_auc(const std::vector<double>& mean_errors);

// Writes curves.csv, auc.csv and manifest.json (atomically) under out_dir.
void emit_reports(const SweepResult& result, const ExperimentConfig& cfg,
                  const std::string& out_dir);

struct CurveRow {
    std::string method;
    double rate = 0.0;
    std::optional<double> mean;
    std::optional<double> stderr_value;
};

std::vector<CurveRow> read_curves_csv(const std::string& path);

void write_file_atomic(const std::string& path, const std::string& content);

// Per-seed materialization used by the sweep and the `filter` CLI verb.
struct SeedData {
    Dataset train;
    Dataset test;
};
SeedData materialize_dataset(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace deepknn
