#pragma once

#include <stdexcept>
#include <string>

namespace sparsevl {

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct NonDifferentiable : std::runtime_error {
    explicit NonDifferentiable(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

struct LinearSolveFailure : std::runtime_error {
    explicit LinearSolveFailure(const std::string& what) : std::runtime_error(what) {}
};

struct SingularDensity : std::runtime_error {
    explicit SingularDensity(const std::string& what) : std::runtime_error(what) {}
};

struct EmptyBins : std::runtime_error {
    explicit EmptyBins(const std::string& what) : std::runtime_error(what) {}
};

struct TooFewRecords : std::runtime_error {
    explicit TooFewRecords(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sparsevl
