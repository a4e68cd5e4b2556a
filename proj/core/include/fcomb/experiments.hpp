#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fcomb/estimation.hpp"
#include "fcomb/inference.hpp"
#include "fcomb/timeseries.hpp"

namespace fcomb {

enum class TestMethod { StandardNormal, SimulatedTwoStep, EtaTTest };

std::string_view to_string(TestMethod method);
TestMethod parse_test_method(std::string_view text);  // standard | simulated | ttest

/// Sample sizes are series lengths T+1, split as R = P = (T+1)/2.
struct McConfig {
    Ar2Dgp dgp;
    Loss loss = Loss::Msfe;
    EstimationMethod benchmark = EstimationMethod::equal_weights();
    EstimationMethod alternative = EstimationMethod::two_step();
    TestMethod method = TestMethod::StandardNormal;
    std::vector<std::size_t> sample_sizes{1000};
    std::size_t reps = 500;
    double alpha = 0.05;
    std::uint64_t base_seed = 1;
    std::size_t draws_h = 10000;
    bool reuse_truncated = false;
    BandwidthBase bandwidth = BandwidthBase::P;
    std::size_t burn_in = kDefaultBurnIn;
    unsigned threads = 0;  // 0: FCOMB_THREADS or hardware concurrency

    void validate() const;
};

struct CurvePoint {
    std::size_t total = 0;  // T+1
    double frequency = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t reps = 0;  // replications that produced a decision
    std::size_t rejections = 0;
    std::size_t failures = 0;
    std::size_t positive_delta = 0;  // replications with Delta_P > 0
};

struct RejectionCurve {
    std::vector<CurvePoint> points;
};

inline constexpr double kMaxFailureShare = 0.01;

/// Seed of replication rep at size index t_index (t_index ignored when reusing truncations).
std::uint64_t replication_seed(std::uint64_t base, std::size_t rep, std::size_t t_index,
                               bool reuse_truncated);

RejectionCurve run_rejection_curve(const McConfig& config);

struct SizePowerConfig {
    Ar2Dgp null_dgp{0.4, -0.407, 1.0};
    Ar2Dgp power_dgp{0.4, -0.45, 1.0};
    Loss loss = Loss::Msfe;
    double benchmark_eta = 0.5;
    std::vector<std::size_t> sample_sizes{1000, 2000, 5000};
    std::size_t reps = 1000;
    double alpha = 0.05;
    std::uint64_t base_seed = 1;
    std::size_t draws_h = 10000;
    BandwidthBase bandwidth = BandwidthBase::P;
    unsigned threads = 0;

    static SizePowerConfig reference_defaults(Loss loss);
    void validate() const;
};

struct SizePowerRow {
    std::string panel;  // "size" | "power"
    std::size_t total = 0;
    double two_step = 0.0;
    double t_test = 0.0;
    double standard = 0.0;
    std::size_t reps = 0;
    std::size_t failures = 0;
};

std::vector<SizePowerRow> run_size_power(const SizePowerConfig& config);

std::pair<double, double> bernoulli_ci(std::size_t successes, std::size_t trials, double level);

unsigned resolve_threads(unsigned requested);

}  // namespace fcomb
