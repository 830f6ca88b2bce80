#include "deepknn/noise.hpp"

#include <algorithm>
#include <stdexcept>

#include "deepknn/rng.hpp"

namespace deepknn {

bool is_permutation_of_range(const std::vector<int>& perm, int num_classes) {
    if (perm.size() != static_cast<std::size_t>(num_classes)) return false;
    std::vector<bool> seen(num_classes, false);
    for (int v : perm) {
        if (v < 0 || v >= num_classes || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

std::vector<int> circular_permutation(int num_classes) {
    if (num_classes < 2)
        throw std::invalid_argument("circular_permutation: need K >= 2");
    std::vector<int> p(num_classes);
    for (int i = 0; i < num_classes; ++i) p[i] = (i + 1) % num_classes;
    return p;
}

std::vector<int> pair_swap_permutation(const std::vector<std::pair<int, int>>& pairs,
                                       int num_classes) {
    if (num_classes < 1)
        throw std::invalid_argument("pair_swap_permutation: need K >= 1");
    std::vector<int> p(num_classes);
    for (int i = 0; i < num_classes; ++i) p[i] = i;
    std::vector<bool> used(num_classes, false);
    for (auto [a, b] : pairs) {
        if (a < 0 || b < 0 || a >= num_classes || b >= num_classes)
            throw std::invalid_argument("pair_swap_permutation: index out of range");
        if (used[a] || used[b] || a == b)
            throw std::invalid_argument("pair_swap_permutation: overlapping pairs");
        used[a] = used[b] = true;
        p[a] = b;
        p[b] = a;
    }
    return p;
}

std::pair<std::vector<int>, CorruptionReport> corrupt(const std::vector<int>& labels,
                                                      int num_classes,
                                                      const NoiseSpec& spec) {
    if (spec.rate < 0.0 || spec.rate > 1.0)
        throw std::invalid_argument("corrupt: rate outside [0,1]");
    for (int l : labels)
        if (l < 0 || l >= num_classes)
            throw std::invalid_argument("corrupt: label out of range");
    if (spec.scheme == NoiseScheme::Flip && num_classes < 2)
        throw std::invalid_argument("corrupt: Flip needs K >= 2");
    if (spec.scheme == NoiseScheme::HardFlip &&
        !is_permutation_of_range(spec.permutation, num_classes))
        throw std::invalid_argument("corrupt: HardFlip needs a valid permutation of [0,K)");

    std::size_t n = labels.size();
    Rng rng(spec.seed);

    std::vector<bool> selected(n, false);
    if (spec.exact_count) {
        std::size_t count = std::min(n, static_cast<std::size_t>(spec.rate * n + 0.5));
        auto perm = rng.permutation(n);
        for (std::size_t i = 0; i < count; ++i) selected[perm[i]] = true;
    } else {
        for (std::size_t i = 0; i < n; ++i) selected[i] = rng.bernoulli(spec.rate);
    }

    std::vector<int> out = labels;
    CorruptionReport report;
    report.original_labels = labels;
    for (std::size_t i = 0; i < n; ++i) {
        if (!selected[i]) continue;
        report.corrupted_indices.push_back(i);
        switch (spec.scheme) {
            case NoiseScheme::Uniform:
                out[i] = static_cast<int>(rng.uniform_int(num_classes));
                break;
            case NoiseScheme::Flip: {
                int draw = static_cast<int>(rng.uniform_int(num_classes - 1));
                out[i] = draw < labels[i] ? draw : draw + 1;
                break;
            }
            case NoiseScheme::HardFlip:
                if (rng.bernoulli(0.5)) out[i] = spec.permutation[labels[i]];
                break;
        }
    }
    report.new_labels = out;
    return {std::move(out), std::move(report)};
}

}  // namespace deepknn
