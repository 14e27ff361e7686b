#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace repsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad magic, unknown version or dtype.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Truncated or otherwise inconsistent payload.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// A value violates a type invariant (non-finite entries, duplicate ids, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Too few data points left after alignment.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Sentence ids of two matrices differ in content or order.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// All-zero or all-identical inputs.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Covariance still singular after regularization, or canonical
/// correlations escaping [0, 1] beyond rounding.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Pair outside the intra-lingual cross-modal / cross-lingual taxonomy.
class TaxonomyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// One or more activation cells are absent from the store. Carries the full list.
class MissingCellsError : public Error {
public:
    explicit MissingCellsError(std::vector<std::string> cells)
        : Error(format(cells)), cells_(std::move(cells)) {}

    const std::vector<std::string>& cells() const noexcept { return cells_; }

private:
    static std::string format(const std::vector<std::string>& cells) {
        std::string msg = "missing " + std::to_string(cells.size()) + " activation cell(s):";
        for (const auto& c : cells) {
            msg += ' ';
            msg += c;
        }
        return msg;
    }

    std::vector<std::string> cells_;
};

}  // namespace repsim
