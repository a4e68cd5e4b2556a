#include "fcomb/timeseries.hpp"

#include <cmath>
#include <string>

#include "fcomb/errors.hpp"
#include "fcomb/rng.hpp"

namespace fcomb {

bool is_stationary(double phi1, double phi2) {
    return phi2 > -1.0 && phi2 < 1.0 - phi1 && phi2 < 1.0 + phi1;
}

void Ar2Dgp::validate() const {
    if (!std::isfinite(phi1) || !std::isfinite(phi2) || !std::isfinite(sigma2_eps))
        throw ValidationError("AR(2) parameters must be finite");
    if (!(sigma2_eps > 0.0))
        throw ValidationError("sigma2_eps must be positive");
    if (!is_stationary(phi1, phi2))
        throw StationarityError("(phi1, phi2) = (" + std::to_string(phi1) + ", " +
                                std::to_string(phi2) + ") is outside the stationarity triangle");
}

double variance_factor(double phi1, double phi2) {
    // (1+phi2)(1-phi1-phi2)(1+phi1-phi2) / (1-phi2) is the factored denominator.
    const double den = (1.0 - phi1 * phi1 - phi2 * phi2) * (1.0 - phi2) - 2.0 * phi1 * phi1 * phi2;
    if (!is_stationary(phi1, phi2) || !(den > 0.0))
        throw StationarityError("non-stationary AR(2): Yule-Walker variance undefined");
    return (1.0 - phi2) / den;
}

Ar2Moments ar2_moments(const Ar2Dgp& dgp) {
    dgp.validate();
    const double rho1 = dgp.phi1 / (1.0 - dgp.phi2);
    return {dgp.sigma2_eps * variance_factor(dgp.phi1, dgp.phi2), rho1,
            dgp.phi2 + dgp.phi1 * rho1};
}

Ar2Dgp unit_variance_dgp(double phi1, double phi2) {
    return {phi1, phi2, 1.0 / variance_factor(phi1, phi2)};
}

std::vector<double> ar2_from_innovations(double phi1, double phi2, double sigma,
                                         std::span<const double> z, std::size_t burn_in) {
    if (z.size() < burn_in) throw ValidationError("innovation stream shorter than burn-in");
    std::vector<double> out(z.size() - burn_in);
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double y = phi1 * y1 + phi2 * y2 + sigma * z[i];
        if (i >= burn_in) out[i - burn_in] = y;
        y2 = y1;
        y1 = y;
    }
    return out;
}

SeriesSample simulate_ar2(const Ar2Dgp& dgp, std::size_t n, std::size_t burn_in,
                          std::uint64_t seed) {
    dgp.validate();
    if (n < 3) throw ValidationError("series length must be at least 3");
    NormalStream rng(seed);
    std::vector<double> z(burn_in + n);
    for (double& v : z) v = rng.next();
    return {ar2_from_innovations(dgp.phi1, dgp.phi2, std::sqrt(dgp.sigma2_eps), z, burn_in), seed,
            burn_in};
}

}  // namespace fcomb
