#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deepknn {

enum class CsvErrorKind {
    MissingFile,
    RaggedRow,
    NonNumericCell,
    NegativeLabel,
    BadLabelColumn,
};

class CsvError : public std::runtime_error {
public:
    CsvError(CsvErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    CsvErrorKind kind() const { return kind_; }

private:
    CsvErrorKind kind_;
};

// Thrown when a training step produces a non-finite loss.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::int64_t step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

}  // namespace deepknn
