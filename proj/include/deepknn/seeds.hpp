#pragma once

#include <cstdint>

namespace deepknn::seeds {

// Fixed offsets added to a run's top-level seed. Every stage derives its own
// stream as `seed + offset`, so any stage can be reproduced in isolation.
inline constexpr std::uint64_t kDataGen = 11;      // synthetic data, train portion
inline constexpr std::uint64_t kTestGen = 23;      // synthetic data, test portion
inline constexpr std::uint64_t kTestSplit = 101;   // train/test partition of CSV data
inline constexpr std::uint64_t kCleanSplit = 202;  // clean/noisy partition
inline constexpr std::uint64_t kNoiseBase = 303;   // + rate index
inline constexpr std::uint64_t kTrain = 404;       // model init + batch shuffling
inline constexpr std::uint64_t kSelection = 505;   // 70/30 subsplit inside selection
inline constexpr std::uint64_t kFilterModel = 606;
inline constexpr std::uint64_t kFinalModel = 707;
inline constexpr std::uint64_t kEstimator = 808;   // preliminary models for matrix estimates

}  // namespace deepknn::seeds
