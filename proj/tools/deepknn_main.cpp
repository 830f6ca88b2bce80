#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include "deepknn/baselines.hpp"
#include "deepknn/filter.hpp"
#include "deepknn/seeds.hpp"
#include "deepknn/stats.hpp"
#include "deepknn/sweep.hpp"
#include "deepknn/theory.hpp"

namespace {

using deepknn::write_file_atomic;

nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    return seeds;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string seeds_csv;
    std::string label_col;
    bool standardize = false;
    int jobs = 0;
};

void apply_common(deepknn::ExperimentConfig& cfg, const CommonOpts& opts) {
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (!opts.seeds_csv.empty()) cfg.seeds = parse_seed_list(opts.seeds_csv);
    if (!opts.label_col.empty()) cfg.dataset.label_col = opts.label_col;
    if (opts.standardize) cfg.dataset.standardize = true;
}

int cmd_sweep(const CommonOpts& opts) {
    deepknn::ExperimentConfig cfg = deepknn::parse_experiment_config(load_json(opts.config_path));
    apply_common(cfg, opts);
    deepknn::SweepResult result = deepknn::run_sweep(cfg);
    deepknn::emit_reports(result, cfg, cfg.out_dir);
    std::printf("sweep: %zu methods x %zu rates x %zu seeds -> %s\n", cfg.methods.size(),
                cfg.rates.size(), cfg.seeds.size(), cfg.out_dir.c_str());
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        if (result.auc[m])
            std::printf("  %-12s auc %.4f\n", deepknn::method_name(cfg.methods[m]).c_str(),
                        *result.auc[m]);
        else
            std::printf("  %-12s auc (incomplete)\n",
                        deepknn::method_name(cfg.methods[m]).c_str());
    }
    return result.all_complete ? 0 : 1;
}

int cmd_filter(const CommonOpts& opts) {
    nlohmann::json j = load_json(opts.config_path);
    deepknn::ExperimentConfig cfg = deepknn::parse_experiment_config(j);
    apply_common(cfg, opts);
    double rate = j.value("rate", 0.0);
    std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds.front();

    deepknn::SeedData data = deepknn::materialize_dataset(cfg, seed);
    auto [clean, noisy] = deepknn::split_clean_noisy(
        data.train, {cfg.clean_fraction, seed + deepknn::seeds::kCleanSplit});
    if (rate > 0.0) {
        deepknn::NoiseSpec nz;
        nz.scheme = cfg.scheme;
        nz.rate = rate;
        nz.exact_count = cfg.exact_count;
        nz.seed = seed + deepknn::seeds::kNoiseBase;
        if (cfg.scheme == deepknn::NoiseScheme::HardFlip)
            nz.permutation = cfg.permutation.empty()
                                 ? deepknn::circular_permutation(data.train.num_classes)
                                 : cfg.permutation;
        noisy.labels = deepknn::corrupt(noisy.labels, data.train.num_classes, nz).first;
    }

    deepknn::Architecture arch{data.train.dim(), cfg.hidden, data.train.num_classes};
    deepknn::TrainConfig tc = cfg.train;
    tc.seed = seed;
    deepknn::FilterConfig fc;
    fc.k = cfg.knn_k > 0 ? static_cast<std::size_t>(cfg.knn_k)
                         : (data.train.size() < 10000 ? 50 : 500);
    fc.exclude_self = cfg.exclude_self;
    fc.pool = cfg.pool;
    fc.seed = seed;

    deepknn::PipelineResult res = deepknn::run_pipeline(noisy, clean, arch, tc, fc);
    std::filesystem::create_directories(cfg.out_dir);
    deepknn::export_filter_audit(res.outcome, cfg.out_dir + "/filter_audit.csv");
    deepknn::save_model(res.final_model, cfg.out_dir + "/final_model.json");

    double test_error = deepknn::error_rate(res.final_model, data.test);
    nlohmann::json summary;
    summary["selection"] =
        res.outcome.selection == deepknn::SelectionChoice::Union ? "union" : "clean_only";
    summary["kept"] = res.outcome.kept_indices.size();
    summary["removed"] = res.outcome.removed_indices.size();
    summary["noise_rate"] = rate;
    summary["test_error"] = test_error;
    write_file_atomic(cfg.out_dir + "/filter_summary.json", summary.dump(2) + "\n");
    std::printf("filter: kept %zu, removed %zu of %zu noisy; test error %.4f -> %s\n",
                res.outcome.kept_indices.size(), res.outcome.removed_indices.size(),
                noisy.size(), test_error, cfg.out_dir.c_str());
    return 0;
}

deepknn::SyntheticFamilySpec parse_family(const nlohmann::json& j) {
    deepknn::SyntheticFamilySpec spec;
    std::string kind = j.value("kind", "ramp");
    if (kind == "ramp")
        spec.family = deepknn::EtaFamily::Ramp;
    else if (kind == "separated_step")
        spec.family = deepknn::EtaFamily::SeparatedStep;
    else if (kind == "gaussian_pair")
        spec.family = deepknn::EtaFamily::GaussianPair;
    else
        throw std::runtime_error("unknown family kind: " + kind);
    spec.dim = j.value("dim", std::size_t{1});
    spec.alpha = j.value("alpha", 1.0);
    spec.c_alpha = j.value("c_alpha", 1.0);
    spec.gap = j.value("gap", 0.2);
    return spec;
}

std::optional<deepknn::CorruptedPlacement> parse_placement(
    const nlohmann::json& j, const deepknn::SyntheticFamilySpec& spec) {
    if (!j.contains("placement")) return std::nullopt;
    const auto& p = j.at("placement");
    std::string kind = p.value("kind", "grid");
    if (kind == "grid")
        return deepknn::make_grid_placement(spec, p.value("count", std::size_t{16}),
                                            p.value("spacing", 0.25),
                                            p.value("center", 0.5));
    if (kind == "cluster")
        return deepknn::make_cluster_placement(spec, p.value("size", std::size_t{100}),
                                               p.at("at").get<std::vector<double>>());
    throw std::runtime_error("unknown placement kind: " + kind);
}

int cmd_theory(const CommonOpts& opts) {
    nlohmann::json j = load_json(opts.config_path);
    std::string out = opts.out_dir.empty() ? j.value("out", "results") : opts.out_dir;
    std::filesystem::create_directories(out);
    std::vector<std::uint64_t> seeds =
        opts.seeds_csv.empty() ? j.value("seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5})
                               : parse_seed_list(opts.seeds_csv);
    deepknn::SyntheticFamilySpec family = parse_family(j.value("family", nlohmann::json::object()));
    std::string experiment = j.value("experiment", "agreement");

    if (experiment == "agreement") {
        std::size_t n = j.value("n", std::size_t{5000});
        std::size_t k = j.value("k", std::size_t{50});
        double delta = j.value("delta", 0.15);
        std::size_t test_points = j.value("test_points", std::size_t{2000});
        auto placement = parse_placement(j, family);

        std::ostringstream csv;
        csv << "seed,tested,violations,violation_fraction,max_knn_radius\n";
        double total = 0.0;
        for (std::uint64_t seed : seeds) {
            deepknn::Matrix tests = deepknn::sample_features(
                family, test_points, seed + deepknn::seeds::kTestGen);
            deepknn::AgreementReport rep = deepknn::margin_agreement_check(
                family, n, k, placement ? &*placement : nullptr, tests, delta, seed);
            csv << seed << "," << rep.tested << "," << rep.violations << ","
                << fmt(rep.violation_fraction) << "," << fmt(rep.max_knn_radius) << "\n";
            total += rep.violation_fraction;
        }
        write_file_atomic(out + "/agreement.csv", csv.str());
        std::printf("agreement: mean violation fraction %.5f over %zu seeds -> %s\n",
                    total / seeds.size(), seeds.size(), out.c_str());
        return 0;
    }

    std::vector<std::size_t> n_list =
        j.value("n_list", std::vector<std::size_t>{500, 1000, 2000, 4000, 8000});
    double k_coeff = j.value("k_coeff", 4.0);
    auto placement = parse_placement(j, family);
    deepknn::RateCurve curve;
    std::string file;
    if (experiment == "rates") {
        curve = deepknn::rate_experiment(family, n_list, k_coeff, seeds,
                                         j.value("test_points", std::size_t{4000}), 0.99,
                                         placement ? &*placement : nullptr);
        file = "rates.csv";
    } else if (experiment == "excess_risk") {
        curve = deepknn::excess_risk_experiment(family, n_list, k_coeff, seeds,
                                                j.value("test_points", std::size_t{30000}),
                                                placement ? &*placement : nullptr);
        file = "excess_risk.csv";
    } else {
        throw std::runtime_error("unknown experiment: " + experiment);
    }
    std::ostringstream csv;
    csv << "n,mean,stderr\n";
    for (std::size_t i = 0; i < curve.n_values.size(); ++i)
        csv << curve.n_values[i] << "," << fmt(curve.values[i]) << ","
            << fmt(curve.stderr_values[i]) << "\n";
    csv << "# slope," << fmt(curve.slope) << "\n";
    write_file_atomic(out + "/" + file, csv.str());
    std::printf("%s: log-log slope %.4f -> %s\n", experiment.c_str(), curve.slope,
                out.c_str());
    return 0;
}

int cmd_spread(const CommonOpts& opts) {
    nlohmann::json j = load_json(opts.config_path);
    std::string out = opts.out_dir.empty() ? j.value("out", "results") : opts.out_dir;
    std::filesystem::create_directories(out);
    std::vector<double> widths =
        j.value("widths", std::vector<double>{0.1, 0.5, 1.0, 1.5, 2.0, 3.0});
    std::size_t clean_n = j.value("clean_n", std::size_t{100});
    std::size_t test_n = j.value("test_n", std::size_t{1000});
    std::size_t k = j.value("k", std::size_t{10});
    std::size_t corrupted = j.value("corrupted", std::size_t{100});
    std::vector<std::uint64_t> seeds =
        opts.seeds_csv.empty()
            ? j.value("seeds", std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10})
            : parse_seed_list(opts.seeds_csv);

    deepknn::SpreadCurve curve =
        deepknn::spread_experiment(widths, clean_n, test_n, k, seeds, corrupted);
    std::ostringstream csv;
    csv << "width,mean_accuracy,stderr\n";
    for (std::size_t i = 0; i < widths.size(); ++i)
        csv << fmt(widths[i]) << "," << fmt(curve.mean_accuracy[i]) << ","
            << fmt(curve.stderr_accuracy[i]) << "\n";
    write_file_atomic(out + "/spread_accuracy.csv", csv.str());
    std::printf("spread: accuracy %.4f at width %.2f up to %.4f at width %.2f\n",
                curve.mean_accuracy.front(), widths.front(), curve.mean_accuracy.back(),
                widths.back());

    if (j.value("with_required_n", true)) {
        deepknn::CleanSamplesCurve need = deepknn::clean_samples_to_target(
            widths, j.value("target_acc", 0.90), test_n, k, seeds,
            j.value("step", std::size_t{10}), j.value("max_clean_n", std::size_t{2000}),
            corrupted);
        std::ostringstream csv2;
        csv2 << "width,required_clean_n,reachable\n";
        for (std::size_t i = 0; i < widths.size(); ++i) {
            csv2 << fmt(widths[i]) << ",";
            if (need.reachable[i]) csv2 << need.required_n[i];
            csv2 << "," << (need.reachable[i] ? 1 : 0) << "\n";
        }
        write_file_atomic(out + "/spread_required_n.csv", csv2.str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deepknn: neighbor-vote filtering of mislabeled training data"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        auto* c = sub->add_option("--config", opts.config_path, "JSON config file");
        if (config_required) c->required();
        sub->add_option("--out", opts.out_dir, "output directory (overrides config)");
        sub->add_option("--seeds", opts.seeds_csv, "comma-separated seed list override");
        sub->add_option("--label-col", opts.label_col, "CSV label column (name or index)");
        sub->add_flag("--standardize", opts.standardize, "standardize features per column");
        sub->add_option("--jobs", opts.jobs, "worker threads (default: all cores)");
    };

    CLI::App* sweep = app.add_subcommand("sweep", "noise-rate sweep over methods");
    add_common(sweep);
    CLI::App* filter = app.add_subcommand("filter", "run the filtering pipeline once");
    add_common(filter);
    CLI::App* theory = app.add_subcommand("theory", "neighbor-consistency experiments");
    add_common(theory);
    CLI::App* spread = app.add_subcommand("spread", "corruption-spread experiments");
    add_common(spread);

    CLI11_PARSE(app, argc, argv);
    if (opts.jobs > 0) omp_set_num_threads(opts.jobs);

    try {
        if (sweep->parsed()) return cmd_sweep(opts);
        if (filter->parsed()) return cmd_filter(opts);
        if (theory->parsed()) return cmd_theory(opts);
        if (spread->parsed()) return cmd_spread(opts);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "deepknn: %s\n", e.what());
        return 2;
    }
    return 0;
}
