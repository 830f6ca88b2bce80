#include "deepknn/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "deepknn/errors.hpp"
#include "deepknn/rng.hpp"

namespace deepknn {

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += weights[l].data.size() + biases[l].size();
    return n;
}

DenseNet init(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.num_classes < 1)
        throw std::invalid_argument("init: invalid architecture");
    for (std::size_t w : arch.hidden)
        if (w == 0) throw std::invalid_argument("init: zero-width hidden layer");

    std::vector<std::size_t> widths;
    widths.push_back(arch.input_dim);
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(static_cast<std::size_t>(arch.num_classes));

    DenseNet net;
    net.arch = arch;
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        std::size_t fan_in = widths[l], fan_out = widths[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Matrix w(fan_out, fan_in);
        for (double& v : w.data) v = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

namespace {

// Forward pass keeping pre-activations; `acts[0]` is the input.
struct ForwardState {
    std::vector<std::vector<double>> acts;  // post-activation per layer
};

void forward(const DenseNet& net, const double* x, ForwardState& st) {
    std::size_t layers = net.layer_count();
    st.acts.resize(layers + 1);
    st.acts[0].assign(x, x + net.arch.input_dim);
    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& w = net.weights[l];
        const std::vector<double>& b = net.biases[l];
        const std::vector<double>& in = st.acts[l];
        std::vector<double>& out = st.acts[l + 1];
        out.resize(w.rows);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double* wr = w.row(i);
            double s = b[i];
            for (std::size_t j = 0; j < w.cols; ++j) s += wr[j] * in[j];
            out[i] = s;
        }
        if (l + 1 < layers)
            for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
}

struct RowLossResult {
    double loss = 0.0;
    std::vector<double> delta;  // dL/dlogits
};

constexpr double kTinyProb = 1e-300;

RowLossResult row_loss(const std::vector<double>& z, const LossBatch& batch,
                       std::size_t row) {
    std::size_t K = z.size();
    double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(K);
    double sum = 0.0;
    for (std::size_t c = 0; c < K; ++c) {
        p[c] = std::exp(z[c] - m);
        sum += p[c];
    }
    for (double& v : p) v /= sum;
    double lse = m + std::log(sum);

    RowLossResult r;
    r.delta = p;
    switch (batch.rows[row]) {
        case LossBatch::Row::Plain: {
            int y = batch.labels[row];
            r.loss = lse - z[y];
            r.delta[y] -= 1.0;
            break;
        }
        case LossBatch::Row::Corrected: {
            int y = batch.labels[row];
            const Matrix& C = batch.correction;
            double q = 0.0;
            for (std::size_t t = 0; t < K; ++t) q += C(t, y) * p[t];
            q = std::max(q, kTinyProb);
            r.loss = -std::log(q);
            for (std::size_t i = 0; i < K; ++i)
                r.delta[i] = -p[i] * (C(i, y) - q) / q;
            break;
        }
        case LossBatch::Row::Soft: {
            const double* t = batch.soft.row(row);
            double dot = 0.0;
            for (std::size_t c = 0; c < K; ++c) {
                dot += t[c] * z[c];
                r.delta[c] -= t[c];
            }
            r.loss = lse - dot;
            break;
        }
    }
    return r;
}

struct Gradients {
    std::vector<Matrix> w;
    std::vector<std::vector<double>> b;

    explicit Gradients(const DenseNet& net) {
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            w.emplace_back(net.weights[l].rows, net.weights[l].cols);
            b.emplace_back(net.biases[l].size(), 0.0);
        }
    }
    void zero() {
        for (auto& m : w) std::fill(m.data.begin(), m.data.end(), 0.0);
        for (auto& v : b) std::fill(v.begin(), v.end(), 0.0);
    }
};

// Accumulates dL/dparams for one example into `g`; returns the example loss.
double backward(const DenseNet& net, const LossBatch& batch, std::size_t row,
                ForwardState& st, Gradients& g) {
    forward(net, batch.features.row(row), st);
    std::size_t layers = net.layer_count();
    RowLossResult rl = row_loss(st.acts[layers], batch, row);

    std::vector<double> delta = std::move(rl.delta);
    for (std::size_t l = layers; l-- > 0;) {
        const std::vector<double>& in = st.acts[l];
        Matrix& gw = g.w[l];
        std::vector<double>& gb = g.b[l];
        for (std::size_t i = 0; i < gw.rows; ++i) {
            double dv = delta[i];
            gb[i] += dv;
            double* gwr = gw.row(i);
            for (std::size_t j = 0; j < gw.cols; ++j) gwr[j] += dv * in[j];
        }
        if (l == 0) break;
        const Matrix& w = net.weights[l];
        std::vector<double> prev(w.cols, 0.0);
        for (std::size_t i = 0; i < w.rows; ++i) {
            const double* wr = w.row(i);
            double dv = delta[i];
            for (std::size_t j = 0; j < w.cols; ++j) prev[j] += wr[j] * dv;
        }
        // ReLU mask of the producing layer
        for (std::size_t j = 0; j < prev.size(); ++j)
            if (st.acts[l][j] <= 0.0) prev[j] = 0.0;
        delta = std::move(prev);
    }
    return rl.loss;
}

struct AdamState {
    Gradients m, v;
    std::int64_t t = 0;
    explicit AdamState(const DenseNet& net) : m(net), v(net) {}
};

void adam_step(DenseNet& net, const Gradients& g, AdamState& st, const TrainConfig& cfg) {
    st.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    auto update = [&](double& param, double grad, double& m, double& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
        param -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.epsilon);
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].data.size(); ++i)
            update(net.weights[l].data[i], g.w[l].data[i], st.m.w[l].data[i],
                   st.v.w[l].data[i]);
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            update(net.biases[l][i], g.b[l][i], st.m.b[l][i], st.v.b[l][i]);
    }
}

bool is_identity(const Matrix& c) {
    if (c.rows != c.cols) return false;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j)
            if (c(i, j) != (i == j ? 1.0 : 0.0)) return false;
    return true;
}

void validate_batch(const DenseNet& net, const LossBatch& batch) {
    std::size_t n = batch.features.rows;
    if (batch.features.cols != net.arch.input_dim)
        throw std::invalid_argument("train: feature dimension mismatch");
    if (batch.rows.size() != n)
        throw std::invalid_argument("train: row mode count mismatch");
    std::size_t K = static_cast<std::size_t>(net.arch.num_classes);
    for (std::size_t i = 0; i < n; ++i) {
        switch (batch.rows[i]) {
            case LossBatch::Row::Soft:
                if (batch.soft.rows != n || batch.soft.cols != K)
                    throw std::invalid_argument("train: soft label shape mismatch");
                break;
            case LossBatch::Row::Corrected:
                if (batch.correction.rows != K || batch.correction.cols != K)
                    throw std::invalid_argument("train: correction matrix shape mismatch");
                [[fallthrough]];
            case LossBatch::Row::Plain:
                if (i >= batch.labels.size() || batch.labels[i] < 0 ||
                    batch.labels[i] >= net.arch.num_classes)
                    throw std::invalid_argument("train: label out of range");
                break;
        }
    }
}

// Training is deliberately single-threaded so results depend only on
// (data, config, seed).
void train_impl(DenseNet& net, const LossBatch& batch, const TrainConfig& cfg) {
    validate_batch(net, batch);
    if (cfg.learning_rate <= 0.0)
        throw std::invalid_argument("train: learning_rate must be positive");
    if (cfg.batch_size == 0)
        throw std::invalid_argument("train: batch_size must be positive");

    std::size_t n = batch.features.rows;
    Rng rng(cfg.seed);
    AdamState opt(net);
    Gradients grads(net);
    ForwardState st;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::int64_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            std::size_t stop = std::min(n, start + cfg.batch_size);
            grads.zero();
            double loss_sum = 0.0;
            for (std::size_t b = start; b < stop; ++b)
                loss_sum += backward(net, batch, order[b], st, grads);
            double inv = 1.0 / static_cast<double>(stop - start);
            for (auto& m : grads.w)
                for (double& v : m.data) v *= inv;
            for (auto& v : grads.b)
                for (double& g : v) g *= inv;
            double loss = loss_sum * inv;
            if (!std::isfinite(loss))
                throw TrainingDiverged(step, "non-finite loss at step " + std::to_string(step));
            adam_step(net, grads, opt, cfg);
            ++step;
        }
    }
}

}  // namespace

void train(DenseNet& net, const Dataset& data, const TrainConfig& cfg) {
    if (data.num_classes != net.arch.num_classes)
        throw std::invalid_argument("train: class count mismatch");
    LossBatch batch;
    batch.features = data.features;
    batch.labels = data.labels;
    batch.rows.assign(data.size(), LossBatch::Row::Plain);
    train_impl(net, batch, cfg);
}

void train_soft(DenseNet& net, const Matrix& features, const Matrix& soft_labels,
                const TrainConfig& cfg) {
    LossBatch batch;
    batch.features = features;
    batch.soft = soft_labels;
    batch.rows.assign(features.rows, LossBatch::Row::Soft);
    train_impl(net, batch, cfg);
}

void train_mixed_corrected(DenseNet& net, const Matrix& features,
                           const std::vector<int>& labels,
                           const std::vector<std::uint8_t>& corrected_mask,
                           const Matrix& correction, const TrainConfig& cfg) {
    if (!corrected_mask.empty() && corrected_mask.size() != features.rows)
        throw std::invalid_argument("train: corrected mask length mismatch");
    LossBatch batch;
    batch.features = features;
    batch.labels = labels;
    batch.correction = correction;
    // An identity correction is plain cross-entropy; route those rows through
    // the plain path so the result matches plain training exactly.
    bool ident = is_identity(correction);
    batch.rows.resize(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        bool corr = corrected_mask.empty() ? true : corrected_mask[i] != 0;
        batch.rows[i] =
            (corr && !ident) ? LossBatch::Row::Corrected : LossBatch::Row::Plain;
    }
    train_impl(net, batch, cfg);
}

std::vector<double> logits(const DenseNet& net, const double* x) {
    ForwardState st;
    forward(net, x, st);
    return st.acts.back();
}

std::vector<double> stable_softmax(const std::vector<double>& z) {
    double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
        p[c] = std::exp(z[c] - m);
        sum += p[c];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> softmax_probs(const DenseNet& net, const double* x) {
    return stable_softmax(logits(net, x));
}

int predict(const DenseNet& net, const double* x) {
    std::vector<double> z = logits(net, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < z.size(); ++c)
        if (z[c] > z[best]) best = c;
    return static_cast<int>(best);
}

Matrix logits_batch(const DenseNet& net, const Matrix& features) {
    if (features.cols != net.arch.input_dim)
        throw std::invalid_argument("logits_batch: dimension mismatch");
    Matrix out(features.rows, static_cast<std::size_t>(net.arch.num_classes));
#pragma omp parallel
    {
        ForwardState st;
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(features.rows); ++i) {
            forward(net, features.row(i), st);
            const std::vector<double>& z = st.acts.back();
            std::copy(z.begin(), z.end(), out.row(i));
        }
    }
    return out;
}

double error_rate(const DenseNet& net, const Dataset& data) {
    std::size_t wrong = 0;
#pragma omp parallel for schedule(static) reduction(+ : wrong)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(data.size()); ++i)
        if (predict(net, data.features.row(i)) != data.labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

double batch_loss(const DenseNet& net, const LossBatch& batch) {
    validate_batch(net, batch);
    ForwardState st;
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.features.rows; ++i) {
        forward(net, batch.features.row(i), st);
        sum += row_loss(st.acts.back(), batch, i).loss;
    }
    return sum / static_cast<double>(batch.features.rows);
}

GradientCheckReport gradient_check(const DenseNet& net, const LossBatch& batch, double h) {
    validate_batch(net, batch);
    Gradients analytic(net);
    ForwardState st;
    double inv = 1.0 / static_cast<double>(batch.features.rows);
    for (std::size_t i = 0; i < batch.features.rows; ++i)
        backward(net, batch, i, st, analytic);
    for (auto& m : analytic.w)
        for (double& v : m.data) v *= inv;
    for (auto& v : analytic.b)
        for (double& g : v) g *= inv;

    DenseNet probe = net;
    GradientCheckReport report;
    report.parameter_count = net.parameter_count();

    auto check_param = [&](double& slot, double grad) {
        double saved = slot;
        slot = saved + h;
        double lp = batch_loss(probe, batch);
        slot = saved - h;
        double lm = batch_loss(probe, batch);
        slot = saved;
        double fd = (lp - lm) / (2.0 * h);
        double rel = std::abs(grad - fd) / std::max(1.0, std::abs(grad) + std::abs(fd));
        report.max_rel_error = std::max(report.max_rel_error, rel);
    };

    for (std::size_t l = 0; l < probe.layer_count(); ++l) {
        for (std::size_t i = 0; i < probe.weights[l].data.size(); ++i)
            check_param(probe.weights[l].data[i], analytic.w[l].data[i]);
        for (std::size_t i = 0; i < probe.biases[l].size(); ++i)
            check_param(probe.biases[l][i], analytic.b[l][i]);
    }
    return report;
}

void save_model(const DenseNet& net, const std::string& path) {
    nlohmann::json j;
    j["format"] = "deepknn-densenet";
    j["version"] = 1;
    j["input_dim"] = net.arch.input_dim;
    j["hidden"] = net.arch.hidden;
    j["num_classes"] = net.arch.num_classes;
    j["weights"] = nlohmann::json::array();
    j["biases"] = nlohmann::json::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        j["weights"].push_back(net.weights[l].data);
        j["biases"].push_back(net.biases[l]);
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << j.dump(2) << "\n";
}

DenseNet load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "deepknn-densenet")
        throw std::runtime_error("load_model: unrecognized format header");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("load_model: unsupported version");
    Architecture arch;
    arch.input_dim = j.at("input_dim").get<std::size_t>();
    arch.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    arch.num_classes = j.at("num_classes").get<int>();
    DenseNet net = init(arch, 0);
    auto weights = j.at("weights");
    auto biases = j.at("biases");
    if (weights.size() != net.layer_count() || biases.size() != net.layer_count())
        throw std::runtime_error("load_model: layer count mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        auto w = weights[l].get<std::vector<double>>();
        auto b = biases[l].get<std::vector<double>>();
        if (w.size() != net.weights[l].data.size() || b.size() != net.biases[l].size())
            throw std::runtime_error("load_model: shape mismatch");
        net.weights[l].data = std::move(w);
        net.biases[l] = std::move(b);
    }
    return net;
}

}  // namespace deepknn
