#include "deepknn/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "deepknn/baselines.hpp"
#include "deepknn/seeds.hpp"
#include "deepknn/stats.hpp"
#include "deepknn/theory.hpp"

#ifndef DEEPKNN_VERSION
#define DEEPKNN_VERSION "0.0.0"
#endif
#ifndef DEEPKNN_GIT_HASH
#define DEEPKNN_GIT_HASH "unknown"
#endif

namespace deepknn {

std::string method_name(Method m) {
    switch (m) {
        case Method::Clean: return "clean";
        case Method::Full: return "full";
        case Method::Forward: return "forward";
        case Method::Glc: return "glc";
        case Method::Distill: return "distill";
        case Method::KnnFilter: return "knn";
        case Method::KnnClassify: return "knn_classify";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "clean") return Method::Clean;
    if (name == "full") return Method::Full;
    if (name == "forward") return Method::Forward;
    if (name == "glc") return Method::Glc;
    if (name == "distill") return Method::Distill;
    if (name == "knn") return Method::KnnFilter;
    if (name == "knn_classify") return Method::KnnClassify;
    throw std::invalid_argument("unknown method: " + name);
}

namespace {

NoiseScheme parse_scheme(const std::string& s) {
    if (s == "uniform") return NoiseScheme::Uniform;
    if (s == "flip") return NoiseScheme::Flip;
    if (s == "hard_flip") return NoiseScheme::HardFlip;
    throw std::invalid_argument("unknown noise scheme: " + s);
}

std::string scheme_name(NoiseScheme s) {
    switch (s) {
        case NoiseScheme::Uniform: return "uniform";
        case NoiseScheme::Flip: return "flip";
        case NoiseScheme::HardFlip: return "hard_flip";
    }
    return "unknown";
}

std::vector<double> default_rates() {
    std::vector<double> r;
    for (int i = 0; i <= 10; ++i) r.push_back(static_cast<double>(i) / 10.0);
    return r;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    ExperimentConfig cfg;

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("csv")) {
            cfg.dataset.kind = DatasetConfig::Kind::Csv;
            cfg.dataset.csv_path = d.at("csv").get<std::string>();
            if (d.contains("label_col")) {
                if (d["label_col"].is_number_integer())
                    cfg.dataset.label_col = std::to_string(d["label_col"].get<int>());
                else
                    cfg.dataset.label_col = d["label_col"].get<std::string>();
            }
            cfg.dataset.standardize = d.value("standardize", false);
            cfg.dataset.test_fraction = d.value("test_fraction", 0.2);
            if (d.contains("num_classes"))
                cfg.dataset.num_classes = d["num_classes"].get<int>();
        } else {
            std::string kind = d.value("synthetic", "blobs");
            cfg.dataset.kind = kind == "two_gaussians" ? DatasetConfig::Kind::TwoGaussians
                                                       : DatasetConfig::Kind::Blobs;
            cfg.dataset.blobs.classes = d.value("classes", 10);
            cfg.dataset.blobs.n = d.value("n", std::size_t{5000});
            cfg.dataset.blobs.dim = d.value("dim", std::size_t{2});
            cfg.dataset.blobs.radius = d.value("radius", 6.0);
            cfg.dataset.blobs.sigma = d.value("sigma", 1.0);
            cfg.dataset.blobs.test_n = d.value("test_n", std::size_t{2000});
        }
    }

    cfg.clean_fraction = j.value("clean_fraction", 0.05);
    if (j.contains("noise")) {
        const auto& nz = j.at("noise");
        cfg.scheme = parse_scheme(nz.value("scheme", "uniform"));
        cfg.exact_count = nz.value("exact_count", false);
        if (nz.contains("permutation") && nz["permutation"].is_array())
            cfg.permutation = nz["permutation"].get<std::vector<int>>();
    }
    if (j.contains("rates"))
        cfg.rates = j.at("rates").get<std::vector<double>>();
    else
        cfg.rates = default_rates();
    for (std::size_t i = 0; i < cfg.rates.size(); ++i) {
        if (cfg.rates[i] < 0.0 || cfg.rates[i] > 1.0)
            throw std::invalid_argument("config: rate outside [0,1]");
        if (i > 0 && cfg.rates[i] <= cfg.rates[i - 1])
            throw std::invalid_argument("config: rates must be ascending");
    }

    if (!j.contains("methods") || j.at("methods").empty())
        throw std::invalid_argument("config: need at least one method");
    for (const auto& m : j.at("methods"))
        cfg.methods.push_back(parse_method(m.get<std::string>()));

    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.learning_rate = t.value("learning_rate", 0.001);
        cfg.train.batch_size = t.value("batch_size", std::size_t{128});
        cfg.train.epochs = t.value("epochs", std::size_t{100});
    } else {
        cfg.train.epochs = 100;
    }
    cfg.knn_k = j.value("knn_k", -1L);
    cfg.exclude_self = j.value("exclude_self", true);
    cfg.pool = j.value("neighbor_pool", std::string("both")) == "noisy_only"
                   ? NeighborPool::NoisyOnly
                   : NeighborPool::CleanAndNoisy;
    cfg.distill_lambda = j.value("distill_lambda", 0.5);
    if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    cfg.out_dir = j.value("out", std::string("results"));
    return cfg;
}

nlohmann::json experiment_config_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    nlohmann::json d;
    if (cfg.dataset.kind == DatasetConfig::Kind::Csv) {
        d["csv"] = cfg.dataset.csv_path;
        d["label_col"] = cfg.dataset.label_col;
        d["standardize"] = cfg.dataset.standardize;
        d["test_fraction"] = cfg.dataset.test_fraction;
        if (cfg.dataset.num_classes) d["num_classes"] = *cfg.dataset.num_classes;
    } else {
        d["synthetic"] =
            cfg.dataset.kind == DatasetConfig::Kind::TwoGaussians ? "two_gaussians" : "blobs";
        d["classes"] = cfg.dataset.blobs.classes;
        d["n"] = cfg.dataset.blobs.n;
        d["dim"] = cfg.dataset.blobs.dim;
        d["radius"] = cfg.dataset.blobs.radius;
        d["sigma"] = cfg.dataset.blobs.sigma;
        d["test_n"] = cfg.dataset.blobs.test_n;
    }
    j["dataset"] = d;
    j["clean_fraction"] = cfg.clean_fraction;
    j["noise"] = {{"scheme", scheme_name(cfg.scheme)}, {"exact_count", cfg.exact_count}};
    if (!cfg.permutation.empty()) j["noise"]["permutation"] = cfg.permutation;
    j["rates"] = cfg.rates;
    j["methods"] = nlohmann::json::array();
    for (Method m : cfg.methods) j["methods"].push_back(method_name(m));
    j["hidden"] = cfg.hidden;
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs", cfg.train.epochs}};
    j["knn_k"] = cfg.knn_k;
    j["exclude_self"] = cfg.exclude_self;
    j["neighbor_pool"] = cfg.pool == NeighborPool::NoisyOnly ? "noisy_only" : "both";
    j["distill_lambda"] = cfg.distill_lambda;
    j["seeds"] = cfg.seeds;
    j["out"] = cfg.out_dir;
    return j;
}

SeedData materialize_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
    SeedData out;
    switch (cfg.dataset.kind) {
        case DatasetConfig::Kind::Blobs: {
            const BlobSpec& b = cfg.dataset.blobs;
            out.train = gen_blobs(b.classes, b.n, b.dim, b.radius, b.sigma,
                                  seed + seeds::kDataGen);
            out.test = gen_blobs(b.classes, b.test_n, b.dim, b.radius, b.sigma,
                                 seed + seeds::kTestGen);
            break;
        }
        case DatasetConfig::Kind::TwoGaussians: {
            const BlobSpec& b = cfg.dataset.blobs;
            out.train = gen_gaussian_task(b.n, seed + seeds::kDataGen);
            out.test = gen_gaussian_task(b.test_n, seed + seeds::kTestGen);
            break;
        }
        case DatasetConfig::Kind::Csv: {
            Dataset all = load_csv(cfg.dataset.csv_path,
                                   LabelColumn::parse(cfg.dataset.label_col),
                                   cfg.dataset.num_classes);
            auto [train, test] =
                subsplit(all, 1.0 - cfg.dataset.test_fraction, seed + seeds::kTestSplit);
            if (cfg.dataset.standardize) {
                ColumnStats st = column_stats(train);
                train = standardize(train, st);
                test = standardize(test, st);
            }
            out.train = std::move(train);
            out.test = std::move(test);
            break;
        }
    }
    return out;
}

namespace {

struct CellJob {
    std::size_t method_idx, rate_idx, seed_idx;
};

double evaluate_predictions(const std::vector<int>& preds, const Dataset& test) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] != test.labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(preds.size());
}

double run_cell(const ExperimentConfig& cfg, Method method, std::size_t rate_idx,
                std::uint64_t seed) {
    SeedData data = materialize_dataset(cfg, seed);
    auto [clean, noisy] =
        split_clean_noisy(data.train, {cfg.clean_fraction, seed + seeds::kCleanSplit});

    NoiseSpec spec;
    spec.scheme = cfg.scheme;
    spec.rate = cfg.rates[rate_idx];
    spec.exact_count = cfg.exact_count;
    spec.seed = seed + seeds::kNoiseBase + rate_idx;
    if (cfg.scheme == NoiseScheme::HardFlip)
        spec.permutation = cfg.permutation.empty()
                               ? circular_permutation(data.train.num_classes)
                               : cfg.permutation;
    noisy.labels = corrupt(noisy.labels, data.train.num_classes, spec).first;

    Architecture arch{data.train.dim(), cfg.hidden, data.train.num_classes};
    TrainConfig tc = cfg.train;
    tc.seed = seed;

    std::size_t k = cfg.knn_k > 0 ? static_cast<std::size_t>(cfg.knn_k)
                                  : (data.train.size() < 10000 ? 50 : 500);

    switch (method) {
        case Method::Clean:
            return error_rate(run_baseline(BaselineMethod::Clean, noisy, clean, arch, tc),
                              data.test);
        case Method::Full:
            return error_rate(run_baseline(BaselineMethod::Full, noisy, clean, arch, tc),
                              data.test);
        case Method::Forward:
            return error_rate(run_baseline(BaselineMethod::Forward, noisy, clean, arch, tc),
                              data.test);
        case Method::Glc:
            return error_rate(run_baseline(BaselineMethod::Glc, noisy, clean, arch, tc),
                              data.test);
        case Method::Distill:
            return error_rate(run_baseline(BaselineMethod::Distill, noisy, clean, arch, tc,
                                           cfg.distill_lambda),
                              data.test);
        case Method::KnnFilter: {
            FilterConfig fc;
            fc.k = k;
            fc.exclude_self = cfg.exclude_self;
            fc.pool = cfg.pool;
            fc.seed = seed;
            PipelineResult res = run_pipeline(noisy, clean, arch, tc, fc);
            return error_rate(res.final_model, data.test);
        }
        case Method::KnnClassify: {
            DenseNet model = run_baseline(BaselineMethod::Full, noisy, clean, arch, tc);
            Dataset reference = concat(clean, noisy);
            reference.num_classes = data.train.num_classes;
            auto preds = knn_classify_batch(model, reference, k, data.test.features);
            return evaluate_predictions(preds, data.test);
        }
    }
    throw std::invalid_argument("run_cell: unknown method");
}

}  // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) throw std::invalid_argument("run_sweep: no methods");
    if (cfg.rates.empty()) throw std::invalid_argument("run_sweep: no rates");
    if (cfg.seeds.empty()) throw std::invalid_argument("run_sweep: no seeds");

    SweepResult res;
    res.methods = cfg.methods;
    res.rates = cfg.rates;
    res.seeds = cfg.seeds;
    res.cells.assign(cfg.methods.size(),
                     std::vector<std::vector<SweepCell>>(
                         cfg.rates.size(), std::vector<SweepCell>(cfg.seeds.size())));

    std::vector<CellJob> jobs;
    for (std::size_t m = 0; m < cfg.methods.size(); ++m)
        for (std::size_t r = 0; r < cfg.rates.size(); ++r)
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
                jobs.push_back({m, r, s});

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t ji = 0; ji < static_cast<std::ptrdiff_t>(jobs.size()); ++ji) {
        const CellJob& job = jobs[ji];
        SweepCell& cell = res.cells[job.method_idx][job.rate_idx][job.seed_idx];
        try {
            cell.error =
                run_cell(cfg, cfg.methods[job.method_idx], job.rate_idx, cfg.seeds[job.seed_idx]);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.ok = false;
            cell.message = e.what();
        }
    }

    res.mean_error.assign(cfg.methods.size(), std::vector<double>(cfg.rates.size(), 0.0));
    res.stderr_error.assign(cfg.methods.size(), std::vector<double>(cfg.rates.size(), 0.0));
    res.complete.assign(cfg.methods.size(), std::vector<bool>(cfg.rates.size(), false));
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        bool method_complete = true;
        for (std::size_t r = 0; r < cfg.rates.size(); ++r) {
            std::vector<double> errs;
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                const SweepCell& cell = res.cells[m][r][s];
                if (cell.ok) {
                    errs.push_back(cell.error);
                } else {
                    std::fprintf(stderr, "deepknn: cell (%s, rate %.3f, seed %llu) failed: %s\n",
                                 method_name(cfg.methods[m]).c_str(), cfg.rates[r],
                                 static_cast<unsigned long long>(cfg.seeds[s]),
                                 cell.message.c_str());
                }
            }
            if (errs.size() == cfg.seeds.size()) {
                res.complete[m][r] = true;
                res.mean_error[m][r] = mean(errs);
                res.stderr_error[m][r] = standard_error(errs);
            } else {
                method_complete = false;
                res.all_complete = false;
            }
        }
        res.auc.push_back(method_complete
                              ? std::optional<double>(compute_auc(res.mean_error[m]))
                              : std::nullopt);
    }
    return res;
}

double compute_auc(const std::vector<double>& mean_errors) {
    if (mean_errors.size() < 2)
        throw std::invalid_argument("compute_auc: need at least 2 points");
    double s = 0.0;
    for (double e : mean_errors) s += e;
    return s;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

void emit_reports(const SweepResult& result, const ExperimentConfig& cfg,
                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ostringstream curves;
    curves << "method,rate,mean,stderr\n";
    for (std::size_t m = 0; m < result.methods.size(); ++m)
        for (std::size_t r = 0; r < result.rates.size(); ++r) {
            curves << method_name(result.methods[m]) << "," << format_double(result.rates[r])
                   << ",";
            if (result.complete[m][r])
                curves << format_double(result.mean_error[m][r]) << ","
                       << format_double(result.stderr_error[m][r]);
            else
                curves << ",";  // missing cells stay empty, never zero
            curves << "\n";
        }
    write_file_atomic(out_dir + "/curves.csv", curves.str());

    std::ostringstream auc;
    auc << "method,auc\n";
    for (std::size_t m = 0; m < result.methods.size(); ++m) {
        auc << method_name(result.methods[m]) << ",";
        if (result.auc[m]) auc << format_double(*result.auc[m]);
        auc << "\n";
    }
    write_file_atomic(out_dir + "/auc.csv", auc.str());

    nlohmann::json manifest;
    manifest["config"] = experiment_config_json(cfg);
    manifest["seeds"] = cfg.seeds;
    manifest["version"] = DEEPKNN_VERSION;
    manifest["git_hash"] = DEEPKNN_GIT_HASH;
    manifest["auc_convention"] = "sum of per-rate mean test errors over the rate grid";
    manifest["all_complete"] = result.all_complete;
    write_file_atomic(out_dir + "/manifest.json", manifest.dump(2) + "\n");
}

std::vector<CurveRow> read_curves_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_curves_csv: cannot open " + path);
    std::vector<CurveRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
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
        if (cells.size() != 4) throw std::runtime_error("read_curves_csv: malformed row");
        CurveRow row;
        row.method = cells[0];
        row.rate = std::stod(cells[1]);
        if (!cells[2].empty()) row.mean = std::stod(cells[2]);
        if (!cells[3].empty()) row.stderr_value = std::stod(cells[3]);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace deepknn
