#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "fcomb/scoring.hpp"

namespace fcomb {

enum class CvMethod { StandardNormal, SimulatedTwoStep, TwoSidedNormal };

std::string_view to_string(CvMethod method);

/// For the one-sided methods reject <=> d_p > critical_value;
/// for TwoSidedNormal reject <=> |d_p| > critical_value.
struct TestOutcome {
    double delta_p = 0.0;
    double omega_hat = 0.0;
    double d_p = 0.0;
    double critical_value = 0.0;
    std::optional<double> p_value;
    bool reject = false;
    CvMethod cv_method = CvMethod::StandardNormal;
    double alpha = 0.05;
    bool omega_floored = false;
};

enum class BandwidthBase { P, T };

struct SimulatedCvModel {
    Eigen::MatrixXd m_etaeta;
    Eigen::MatrixXd m_etagamma;
    Eigen::MatrixXd sigma_x;
    Eigen::MatrixXd sigma_z;
    double ratio_p_over_r = 1.0;
    std::size_t draws_h = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

double average_loss_difference(const LossSeries& bench, const LossSeries& alt);

/// Quadratic-spectral kernel; k(0) = 1.
double qs_kernel(double x);

struct LrvEstimate {
    double value = 0.0;
    bool floored = false;
};

/// QS-weighted sum of demeaned autocovariances, floored at 0.
LrvEstimate hac_lrv(std::span<const double> d_series, double bandwidth);

/// Matrix version; rows are time periods.
Eigen::MatrixXd hac_lrv_matrix(const Eigen::MatrixXd& rows, double bandwidth);

double normal_quantile(double p);

TestOutcome standard_test(const LossSeries& bench, const LossSeries& alt, double alpha,
                          BandwidthBase base = BandwidthBase::P);

SimulatedCvModel estimate_cv_model(Loss loss, const PoolParams& benchmark,
                                   std::span<const double> series, const SplitScheme& split,
                                   std::size_t draws_h, std::uint64_t seed,
                                   BandwidthBase base = BandwidthBase::P);

/// The ceil((1-alpha) H)-th smallest simulated Delta^(h).
double simulated_critical_value(const SimulatedCvModel& model, double alpha);

TestOutcome simulated_cv_test(const LossSeries& bench, const LossSeries& alt,
                              const SimulatedCvModel& model, double alpha);

struct EtaStandardError {
    double eta = 0.0;
    double se = 0.0;
};

/// Stacked two-step sandwich for the in-sample weight estimate.
EtaStandardError two_step_eta_se(std::span<const double> series, const SplitScheme& split,
                                 Loss loss);

TestOutcome two_step_eta_ttest(std::span<const double> series, const SplitScheme& split,
                               Loss loss, double eta0, double alpha);

}  // namespace fcomb
