#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace fcomb {

enum class Loss { Msfe, LogScore };

std::string_view to_string(Loss loss);
Loss parse_loss(std::string_view text);  // "msfe" | "log"

/// Linear pool of K unit-variance normals; constituent j predicts gamma[j] * y_{t-1-j}.
/// Weights are held as the K-1 free coordinates; the last weight is implied.
struct PoolParams {
    std::vector<double> eta;
    std::vector<double> gamma;

    static PoolParams two(double eta1, double gamma1, double gamma2);

    std::size_t k() const { return gamma.size(); }
    double weight(std::size_t j) const;
    std::vector<double> weights() const;
    std::size_t free_dim() const { return eta.size() + gamma.size(); }
    void validate() const;

    bool operator==(const PoolParams&) const = default;
};

/// R + P = T + 1. Targets of the out-of-sample block are y_{R+1}..y_{T+1}.
struct SplitScheme {
    std::size_t r = 0;
    std::size_t p = 0;

    static SplitScheme halves(std::size_t total);

    std::size_t total() const { return r + p; }
    double c() const { return static_cast<double>(r) / static_cast<double>(p); }
    void validate() const;

    bool operator==(const SplitScheme&) const = default;
};

struct LossSeries {
    std::vector<double> losses;
    SplitScheme split;
};

/// Targets y[first..last) of a series; lags may reach below first.
struct SampleWindow {
    std::span<const double> y;
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const { return last - first; }
    void validate(std::size_t max_lag) const;

    static SampleWindow whole(std::span<const double> y, std::size_t max_lag = 2);
    static SampleWindow in_sample(std::span<const double> y, const SplitScheme& split,
                                  std::size_t max_lag = 2);
    static SampleWindow out_of_sample(std::span<const double> y, const SplitScheme& split);
};

double combination_loss(Loss loss, const PoolParams& theta, double y,
                        std::span<const double> lags);

LossSeries out_of_sample_losses(Loss loss, const PoolParams& theta,
                                std::span<const double> series, const SplitScheme& split);

/// Per-period gradients: one row per target, columns are the free weights then gamma.
Eigen::MatrixXd per_period_gradients(Loss loss, const PoolParams& theta,
                                     const SampleWindow& window);

struct ScoreGradient {
    Eigen::VectorXd eta;
    Eigen::VectorXd gamma;
};

/// Summed over the window.
ScoreGradient score_gradient(Loss loss, const PoolParams& theta, const SampleWindow& window);

struct HessianBlocks {
    Eigen::MatrixXd m_etaeta;
    Eigen::MatrixXd m_etagamma;
};

/// Window averages.
HessianBlocks hessian_blocks(Loss loss, const PoolParams& theta, const SampleWindow& window);
Eigen::MatrixXd full_hessian(Loss loss, const PoolParams& theta, const SampleWindow& window);

double average_loss(Loss loss, const PoolParams& theta, const SampleWindow& window);

}  // namespace fcomb
