#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace deepknn {

enum class NoiseScheme { Uniform, Flip, HardFlip };

struct NoiseSpec {
    NoiseScheme scheme = NoiseScheme::Uniform;
    double rate = 0.0;
    std::vector<int> permutation;  // required for HardFlip, a bijection on [0,K)
    std::uint64_t seed = 0;
    // When set, exactly round(rate*n) examples are selected instead of
    // independent per-example coins.
    bool exact_count = false;
};

struct CorruptionReport {
    // Examples selected for corruption. Selection does not imply a changed
    // label: Uniform may redraw the same label and HardFlip keeps the label
    // on the tail of its coin.
    std::vector<std::size_t> corrupted_indices;
    std::vector<int> original_labels;
    std::vector<int> new_labels;
};

// Applies the corruption scheme. Each example is selected with probability
// `rate`; selected examples are relabeled:
//   Uniform  -> uniform over all K labels (may keep its own)
//   Flip     -> uniform over the K-1 other labels
//   HardFlip -> with probability 1/2 mapped through the permutation,
//               otherwise unchanged
std::pair<std::vector<int>, CorruptionReport> corrupt(const std::vector<int>& labels,
                                                      int num_classes,
                                                      const NoiseSpec& spec);

// pi(i) = (i+1) mod K.
std::vector<int> circular_permutation(int num_classes);

// Swaps each given pair, fixes everything else. Pairs must be disjoint.
std::vector<int> pair_swap_permutation(const std::vector<std::pair<int, int>>& pairs,
                                       int num_classes);

bool is_permutation_of_range(const std::vector<int>& perm, int num_classes);

}  // namespace deepknn
