#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fcomb/scoring.hpp"
#include "fcomb/timeseries.hpp"

namespace fcomb {

/// Coefficients of the log-barrier criterion
///   a log(1+phi2) + b log(1-phi1-phi2) + c log(1+phi1-phi2) + d log(phi1^2+phi2^2).
struct CriterionWeights {
    double a = -4.0;
    double b = -1.0;
    double c = -2.0;
    double d = -0.1;
};

inline constexpr std::uint64_t kDefaultSolverSeed = 20240917;
inline constexpr std::size_t kDefaultSimN = 1'000'000;

/// +inf outside the stationarity triangle and at the origin.
double dgp_criterion(double phi1, double phi2, const CriterionWeights& w = {});

std::array<double, 2> criterion_minimizer(const CriterionWeights& w = {});

/// Unclipped MSFE weight rho1^2 (1-rho2) / (rho1^2 + rho2^2 - 2 rho1^2 rho2).
double msfe_eta_star_raw(double rho1, double rho2);

struct PseudoTruths {
    std::vector<double> gamma_star;
    double eta_star = 0.0;
};

/// gamma* = (rho1, rho2). Msfe weight is analytic; log-score weight solves the simulated FOC.
PseudoTruths population_pseudo_truths(const Ar2Dgp& dgp, Loss loss,
                                      std::size_t sim_n = kDefaultSimN,
                                      std::uint64_t seed = kDefaultSolverSeed);

/// Root in [0, 1] of the simulated average d loss / d eta at gamma = (rho1, rho2).
double simulated_eta_star(const Ar2Dgp& dgp, Loss loss, std::size_t sim_n, std::uint64_t seed);

struct SolverOptions {
    std::size_t sim_n = kDefaultSimN;
    std::size_t coarse_sim_n = 100'000;
    std::uint64_t seed = kDefaultSolverSeed;
    double tolerance = 1e-3;
    std::size_t max_outer = 40;
    std::vector<std::array<double, 2>> starts{
        {0.38, 0.14}, {0.40, -0.40}, {0.60, -0.30}, {0.20, 0.30}, {0.80, 0.05}, {0.10, -0.60}};
    CriterionWeights weights;
};

struct DgpSolution {
    Ar2Dgp dgp;
    Loss loss = Loss::Msfe;
    double target_eta_star = 0.0;
    double achieved_eta_star = 0.0;
    std::vector<double> gamma_star;
    double criterion_value = 0.0;
    std::vector<double> constraint_residuals;  // weight constraint, Var(y) - 1
    std::size_t sim_n = 0;
    std::uint64_t seed = 0;
};

DgpSolution solve_for_eta_star(double target, Loss loss, const SolverOptions& options = {});

}  // namespace fcomb
