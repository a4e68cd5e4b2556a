#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fcomb {

/// y_t = phi1 y_{t-1} + phi2 y_{t-2} + e_t, e_t ~ N(0, sigma2_eps).
struct Ar2Dgp {
    double phi1 = 0.0;
    double phi2 = 0.0;
    double sigma2_eps = 1.0;

    void validate() const;  // throws StationarityError / ValidationError
};

struct Ar2Moments {
    double variance;
    double rho1;
    double rho2;
};

struct SeriesSample {
    std::vector<double> values;
    std::uint64_t seed = 0;
    std::size_t burn_in = 0;
};

inline constexpr std::size_t kDefaultBurnIn = 1000;

bool is_stationary(double phi1, double phi2);

/// Var(y) / sigma2_eps from the Yule-Walker equations.
double variance_factor(double phi1, double phi2);

Ar2Moments ar2_moments(const Ar2Dgp& dgp);

/// sigma2_eps chosen so that Var(y) = 1.
Ar2Dgp unit_variance_dgp(double phi1, double phi2);

/// Runs the recursion over a given innovation stream (standard normal draws);
/// returns the values after the first burn_in steps.
std::vector<double> ar2_from_innovations(double phi1, double phi2, double sigma,
                                         std::span<const double> z, std::size_t burn_in);

/// Recursion starts from y_0 = y_{-1} = 0; the first burn_in draws are dropped.
SeriesSample simulate_ar2(const Ar2Dgp& dgp, std::size_t n,
                          std::size_t burn_in, std::uint64_t seed);

}  // namespace fcomb
