#pragma once

#include <stdexcept>
#include <string>

namespace fcomb {

// Bad inputs: the CLI maps these to exit status 2.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StationarityError : ValidationError {
    using ValidationError::ValidationError;
};

struct IdentificationError : ValidationError {
    using ValidationError::ValidationError;
};

// Data-dependent failures raised during estimation or testing.
struct DegenerateDataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RankDeficiencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
    InfeasibleError(const std::string& what, double residual)
        : std::runtime_error(what), best_residual(residual) {}
    double best_residual;
};

}  // namespace fcomb
