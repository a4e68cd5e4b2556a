#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fcomb/scoring.hpp"

namespace fcomb {

struct EstimationMethod {
    enum class Kind { OneStep, TwoStepOptimal, TwoStepFixed };

    Kind kind = Kind::TwoStepOptimal;
    std::vector<double> eta;  // free weight coordinates, TwoStepFixed only

    static EstimationMethod one_step() { return {Kind::OneStep, {}}; }
    static EstimationMethod two_step() { return {Kind::TwoStepOptimal, {}}; }
    static EstimationMethod fixed(double eta1) { return {Kind::TwoStepFixed, {eta1}}; }
    static EstimationMethod equal_weights() { return fixed(0.5); }

    void validate() const;
    bool operator==(const EstimationMethod&) const = default;
};

std::string to_string(const EstimationMethod& method);
/// "one-step", "two-step", "equal", or "fixed:<eta>".
EstimationMethod parse_method(std::string_view text);

struct FitResult {
    PoolParams theta;
    double in_sample_avg_loss = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t multi_start_best_of = 1;
    std::optional<std::string> identified_set_note;
};

struct EmOptions {
    std::size_t max_iterations = 10000;
    double tolerance = 1e-10;  // on the average log-likelihood gain
    std::vector<double> starts{0.1, 0.3, 0.5, 0.7, 0.9};
    bool newton_polish = true;
    std::vector<double>* trace = nullptr;  // average log-likelihood per EM iteration
};

inline constexpr double kGradientTolerance = 1e-6;
inline constexpr double kSnapThreshold = 1e-12;

/// Least squares of y_t on y_{t-j}, j = 1..k.
std::vector<double> fit_constituents(Loss loss, const SampleWindow& window, std::size_t k = 2);

FitResult fit_two_step(Loss loss, const SampleWindow& window, const EmOptions& options = {});
FitResult fit_one_step(Loss loss, const SampleWindow& window, const EmOptions& options = {});
FitResult fit_method(const EstimationMethod& method, Loss loss, const SampleWindow& window);

PoolParams make_fixed(const std::vector<double>& eta, const std::vector<double>& gamma);

}  // namespace fcomb
