#include "deepknn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "deepknn/seeds.hpp"

namespace deepknn {

void validate_corruption_matrix(const Matrix& c, double tol) {
    if (c.rows == 0 || c.rows != c.cols)
        throw std::invalid_argument("corruption matrix must be square and nonempty");
    for (std::size_t i = 0; i < c.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < c.cols; ++j) {
            if (c(i, j) < -tol)
                throw std::invalid_argument("corruption matrix has a negative entry");
            sum += c(i, j);
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("corruption matrix row does not sum to 1");
    }
}

Matrix identity_matrix(std::size_t k) {
    Matrix m(k, k);
    for (std::size_t i = 0; i < k; ++i) m(i, i) = 1.0;
    return m;
}

namespace {

void renormalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) sum += m(i, j);
        if (sum > 0.0)
            for (std::size_t j = 0; j < m.cols; ++j) m(i, j) /= sum;
    }
}

PosteriorFn model_posterior(const DenseNet& model) {
    return [&model](const double* x) { return softmax_probs(model, x); };
}

}  // namespace

Matrix glc_estimate(const PosteriorFn& posterior, const Dataset& clean, int num_classes) {
    if (clean.size() == 0)
        throw std::invalid_argument("glc_estimate: clean set is empty");
    std::size_t K = static_cast<std::size_t>(num_classes);
    Matrix acc(K, K);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < clean.size(); ++i) {
        std::vector<double> p = posterior(clean.features.row(i));
        std::size_t t = static_cast<std::size_t>(clean.labels[i]);
        counts[t]++;
        for (std::size_t j = 0; j < K; ++j) acc(t, j) += p[j];
    }
    for (std::size_t t = 0; t < K; ++t) {
        if (counts[t] == 0) {
            std::fprintf(stderr,
                         "deepknn: class %zu absent from the clean set; using an "
                         "identity row in the corruption estimate\n",
                         t);
            for (std::size_t j = 0; j < K; ++j) acc(t, j) = (t == j) ? 1.0 : 0.0;
        }
    }
    renormalize_rows(acc);
    return acc;
}

Matrix glc_estimate(const DenseNet& model_on_noisy, const Dataset& clean) {
    return glc_estimate(model_posterior(model_on_noisy), clean,
                        model_on_noisy.arch.num_classes);
}

Matrix forward_estimate(const PosteriorFn& posterior, const Dataset& noisy,
                        int num_classes) {
    if (noisy.size() == 0)
        throw std::invalid_argument("forward_estimate: noisy set is empty");
    std::size_t K = static_cast<std::size_t>(num_classes);
    std::vector<std::vector<double>> posteriors(noisy.size());
    for (std::size_t i = 0; i < noisy.size(); ++i)
        posteriors[i] = posterior(noisy.features.row(i));

    Matrix c(K, K);
    for (std::size_t t = 0; t < K; ++t) {
        double best = -1.0;
        std::size_t proto = 0;
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            if (posteriors[i][t] > best) {
                best = posteriors[i][t];
                proto = i;
            }
        }
        if (best <= 0.0) {
            std::fprintf(stderr,
                         "deepknn: no prototype found for class %zu; using an "
                         "identity row in the corruption estimate\n",
                         t);
            for (std::size_t j = 0; j < K; ++j) c(t, j) = (t == j) ? 1.0 : 0.0;
        } else {
            for (std::size_t j = 0; j < K; ++j) c(t, j) = posteriors[proto][j];
        }
    }
    renormalize_rows(c);
    return c;
}

Matrix forward_estimate(const DenseNet& model_on_noisy, const Dataset& noisy) {
    return forward_estimate(model_posterior(model_on_noisy), noisy,
                            model_on_noisy.arch.num_classes);
}

DenseNet train_corrected(const Dataset& noisy, const Matrix& correction,
                         const Architecture& arch, const TrainConfig& cfg) {
    validate_corruption_matrix(correction);
    DenseNet net = init(arch, cfg.seed);
    train_mixed_corrected(net, noisy.features, noisy.labels, {}, correction, cfg);
    return net;
}

Matrix distill_labels(const DenseNet& model_on_clean, const Dataset& noisy, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("distill_labels: lambda outside [0,1]");
    std::size_t K = static_cast<std::size_t>(model_on_clean.arch.num_classes);
    Matrix soft(noisy.size(), K);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        std::vector<double> p = softmax_probs(model_on_clean, noisy.features.row(i));
        for (std::size_t j = 0; j < K; ++j) soft(i, j) = (1.0 - lambda) * p[j];
        soft(i, static_cast<std::size_t>(noisy.labels[i])) += lambda;
    }
    return soft;
}

namespace {

Matrix onehot_rows(const std::vector<int>& labels, std::size_t K) {
    Matrix m(labels.size(), K);
    for (std::size_t i = 0; i < labels.size(); ++i)
        m(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return m;
}

// Corrected loss on the noisy rows, plain loss on the clean rows, mixed in
// one shuffled stream (clean rows first in the stacked set).
DenseNet train_estimated_correction(const Dataset& noisy, const Dataset& clean,
                                    const Matrix& correction, const Architecture& arch,
                                    const TrainConfig& cfg) {
    Dataset stacked = concat(clean, noisy);
    std::vector<std::uint8_t> mask(stacked.size(), 0);
    for (std::size_t i = clean.size(); i < stacked.size(); ++i) mask[i] = 1;
    TrainConfig tc = cfg;
    tc.seed = cfg.seed + seeds::kTrain;
    DenseNet net = init(arch, tc.seed);
    train_mixed_corrected(net, stacked.features, stacked.labels, mask, correction, tc);
    return net;
}

}  // namespace

DenseNet run_baseline(BaselineMethod method, const Dataset& noisy, const Dataset& clean,
                      const Architecture& arch, const TrainConfig& cfg,
                      double distill_lambda) {
    TrainConfig tc = cfg;
    switch (method) {
        case BaselineMethod::Clean: {
            if (clean.size() == 0)
                throw std::invalid_argument("baseline Clean: clean set is empty");
            tc.seed = cfg.seed + seeds::kTrain;
            DenseNet net = init(arch, tc.seed);
            Dataset d = clean;
            d.num_classes = arch.num_classes;
            train(net, d, tc);
            return net;
        }
        case BaselineMethod::Full: {
            Dataset full = concat(clean, noisy);
            if (full.size() == 0)
                throw std::invalid_argument("baseline Full: no training data");
            full.num_classes = arch.num_classes;
            tc.seed = cfg.seed + seeds::kTrain;
            DenseNet net = init(arch, tc.seed);
            train(net, full, tc);
            return net;
        }
        case BaselineMethod::Forward: {
            if (noisy.size() == 0)
                throw std::invalid_argument("baseline Forward: noisy set is empty");
            TrainConfig est = cfg;
            est.seed = cfg.seed + seeds::kEstimator;
            DenseNet on_noisy = init(arch, est.seed);
            Dataset nd = noisy;
            nd.num_classes = arch.num_classes;
            train(on_noisy, nd, est);
            Matrix c = forward_estimate(on_noisy, noisy);
            return train_estimated_correction(noisy, clean, c, arch, cfg);
        }
        case BaselineMethod::Glc: {
            if (clean.size() == 0)
                throw std::invalid_argument("baseline GLC: clean set is empty");
            if (noisy.size() == 0)
                throw std::invalid_argument("baseline GLC: noisy set is empty");
            TrainConfig est = cfg;
            est.seed = cfg.seed + seeds::kEstimator;
            DenseNet on_noisy = init(arch, est.seed);
            Dataset nd = noisy;
            nd.num_classes = arch.num_classes;
            train(on_noisy, nd, est);
            Matrix c = glc_estimate(on_noisy, clean);
            return train_estimated_correction(noisy, clean, c, arch, cfg);
        }
        case BaselineMethod::Distill: {
            if (clean.size() == 0)
                throw std::invalid_argument("baseline Distill: clean set is empty");
            TrainConfig est = cfg;
            est.seed = cfg.seed + seeds::kEstimator;
            DenseNet on_clean = init(arch, est.seed);
            Dataset cd = clean;
            cd.num_classes = arch.num_classes;
            train(on_clean, cd, est);

            std::size_t K = static_cast<std::size_t>(arch.num_classes);
            Dataset stacked = concat(clean, noisy);
            Matrix soft(stacked.size(), K);
            Matrix clean_rows = onehot_rows(clean.labels, K);
            std::copy(clean_rows.data.begin(), clean_rows.data.end(), soft.data.begin());
            if (noisy.size() > 0) {
                Matrix noisy_rows = distill_labels(on_clean, noisy, distill_lambda);
                std::copy(noisy_rows.data.begin(), noisy_rows.data.end(),
                          soft.data.begin() + clean_rows.data.size());
            }
            tc.seed = cfg.seed + seeds::kTrain;
            DenseNet net = init(arch, tc.seed);
            train_soft(net, stacked.features, soft, tc);
            return net;
        }
    }
    throw std::invalid_argument("run_baseline: unknown method");
}

void export_matrix_csv(const Matrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("export_matrix_csv: cannot open " + path);
    char buf[32];
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            out << (j ? "," : "") << buf;
        }
        out << "\n";
    }
}

}  // namespace deepknn
