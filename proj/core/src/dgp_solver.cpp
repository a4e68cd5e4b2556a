#include "fcomb/dgp_solver.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "fcomb/errors.hpp"
#include "fcomb/rng.hpp"

namespace fcomb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kConstraintTol = 1e-8;

using Point = std::array<double, 2>;
using Objective = std::function<double(const Point&)>;

struct Simplex {
    Point x;
    double f;
};

// Nelder-Mead with restarts; non-finite values act as walls.
Simplex nelder_mead(const Objective& f, Point x0, double scale, std::size_t max_evals) {
    auto eval = [&](const Point& p) {
        const double v = f(p);
        return std::isfinite(v) ? v : kInf;
    };
    Simplex best{x0, eval(x0)};
    std::size_t evals = 1;
    for (int restart = 0; restart < 6 && evals < max_evals; ++restart) {
        std::array<Simplex, 3> s{best, Simplex{{best.x[0] + scale, best.x[1]}, 0.0},
                                 Simplex{{best.x[0], best.x[1] + scale}, 0.0}};
        s[1].f = eval(s[1].x);
        s[2].f = eval(s[2].x);
        evals += 2;
        const double start_f = best.f;
        while (evals < max_evals) {
            std::sort(s.begin(), s.end(), [](const Simplex& a, const Simplex& b) { return a.f < b.f; });
            const double size = std::max(std::hypot(s[1].x[0] - s[0].x[0], s[1].x[1] - s[0].x[1]),
                                         std::hypot(s[2].x[0] - s[0].x[0], s[2].x[1] - s[0].x[1]));
            if (size < 1e-11 || (std::isfinite(s[2].f) && s[2].f - s[0].f < 1e-15 * (1.0 + std::abs(s[0].f)) && size < 1e-7))
                break;
            const Point c{(s[0].x[0] + s[1].x[0]) / 2.0, (s[0].x[1] + s[1].x[1]) / 2.0};
            auto along = [&](double t) {
                return Point{c[0] + t * (s[2].x[0] - c[0]), c[1] + t * (s[2].x[1] - c[1])};
            };
            const Point xr = along(-1.0);
            const double fr = eval(xr);
            ++evals;
            if (fr < s[0].f) {
                const Point xe = along(-2.0);
                const double fe = eval(xe);
                ++evals;
                s[2] = fe < fr ? Simplex{xe, fe} : Simplex{xr, fr};
            } else if (fr < s[1].f) {
                s[2] = {xr, fr};
            } else {
                const bool outside = fr < s[2].f;
                const Point xc = along(outside ? -0.5 : 0.5);
                const double fc = eval(xc);
                ++evals;
                if (fc < (outside ? fr : s[2].f)) {
                    s[2] = {xc, fc};
                } else {
                    for (int i = 1; i < 3; ++i) {
                        s[i].x = {(s[i].x[0] + s[0].x[0]) / 2.0, (s[i].x[1] + s[0].x[1]) / 2.0};
                        s[i].f = eval(s[i].x);
                    }
                    evals += 2;
                }
            }
        }
        std::sort(s.begin(), s.end(), [](const Simplex& a, const Simplex& b) { return a.f < b.f; });
        best = s[0];
        scale *= 0.1;
        if (!(best.f < start_f - 1e-14 * (1.0 + std::abs(start_f))) && restart > 0) break;
    }
    return best;
}

// d/d eta of the log-score with one exponential per target.
inline double log_eta_score(double y, double x1, double x2, double g1, double g2, double eta) {
    const double u1 = y - g1 * x1;
    const double u2 = y - g2 * x2;
    const double diff = 0.5 * (u2 * u2 - u1 * u1);  // l1 - l2
    if (diff >= 0.0) {
        const double r = std::exp(-diff);  // f2 / f1
        return -(1.0 - r) / (eta + (1.0 - eta) * r);
    }
    const double r = std::exp(diff);  // f1 / f2
    return -(r - 1.0) / (eta * r + (1.0 - eta));
}

// Fixed innovation stream shared by every constraint evaluation of one solve.
class CrnSample {
public:
    CrnSample(std::size_t sim_n, std::uint64_t seed) : z_(kDefaultBurnIn + sim_n + 2) {
        NormalStream rng(seed);
        for (double& v : z_) v = rng.next();
    }

    // Average d loss / d eta at (eta, rho1, rho2) on the unit-variance path, in one pass.
    double log_foc(double phi1, double phi2, double g1, double g2, double eta) const {
        const double sigma = std::sqrt(1.0 / variance_factor(phi1, phi2));
        double y1 = 0.0, y2 = 0.0, acc = 0.0;
        const std::size_t first = kDefaultBurnIn + 2;
        for (std::size_t i = 0; i < z_.size(); ++i) {
            const double y = phi1 * y1 + phi2 * y2 + sigma * z_[i];
            if (i >= first) acc += log_eta_score(y, y1, y2, g1, g2, eta);
            y2 = y1;
            y1 = y;
        }
        return acc / static_cast<double>(z_.size() - first);
    }

private:
    std::vector<double> z_;
};

double msfe_eta_foc(const std::vector<double>& y, double g1, double g2, double eta) {
    double s = 0.0;
    for (std::size_t i = 0; i + 2 < y.size(); ++i) {
        const double a = g1 * y[i + 1] - g2 * y[i];
        const double e = eta * a + g2 * y[i] - y[i + 2];
        s += 2.0 * e * a;
    }
    return s / static_cast<double>(y.size() - 2);
}

double bracket_root(const std::function<double(double)>& g) {
    const double g0 = g(0.0);
    if (g0 >= 0.0) return 0.0;
    const double g1 = g(1.0);
    if (g1 <= 0.0) return 1.0;
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(a - b) <= 1e-13; };
    const auto r = boost::math::tools::toms748_solve(g, 0.0, 1.0, g0, g1, tol, iters);
    return 0.5 * (r.first + r.second);
}

Ar2Moments unit_moments(double phi1, double phi2) {
    return ar2_moments(unit_variance_dgp(phi1, phi2));
}

// Weight constraint c(phi) = 0 <=> pseudo-true weight equals the target.
class Constraint {
public:
    Constraint(Loss loss, double target, const CrnSample* crn)
        : loss_(loss), target_(target), crn_(crn) {}

    double operator()(double phi1, double phi2) const {
        if (!is_stationary(phi1, phi2) || (phi1 == 0.0 && phi2 == 0.0)) return kInf;
        const Ar2Moments m = unit_moments(phi1, phi2);
        if (loss_ == Loss::Msfe) {
            const double den = m.rho1 * m.rho1 + m.rho2 * m.rho2 - 2.0 * m.rho1 * m.rho1 * m.rho2;
            if (!(den > 0.0)) return kInf;
            // Signed square root keeps a non-zero gradient on the target-0 locus.
            return m.rho1 * std::sqrt((1.0 - m.rho2) / den) - std::sqrt(target_);
        }
        return crn_->log_foc(phi1, phi2, m.rho1, m.rho2, target_);
    }

private:
    Loss loss_;
    double target_;
    const CrnSample* crn_;
};

struct AlResult {
    Point x;
    double residual;
    double lambda;
};

AlResult augmented_lagrangian(const Objective& f, const Constraint& c, Point x, double lambda,
                              double mu, std::size_t max_outer) {
    double prev = kInf;
    double cx = c(x[0], x[1]);
    for (std::size_t outer = 0; outer < max_outer; ++outer) {
        const Objective la = [&](const Point& p) {
            const double fv = f(p);
            if (!std::isfinite(fv)) return kInf;
            const double cv = c(p[0], p[1]);
            if (!std::isfinite(cv)) return kInf;
            return fv + lambda * cv + 0.5 * mu * cv * cv;
        };
        x = nelder_mead(la, x, 0.02, 1500).x;
        cx = c(x[0], x[1]);
        if (!std::isfinite(cx)) break;
        if (std::abs(cx) < kConstraintTol) break;
        lambda += mu * cx;
        if (std::abs(cx) > 0.25 * prev) mu = std::min(mu * 10.0, 1e12);
        prev = std::abs(cx);
    }
    return {x, cx, lambda};
}

}  // namespace

double dgp_criterion(double phi1, double phi2, const CriterionWeights& w) {
    const double t1 = 1.0 + phi2;
    const double t2 = 1.0 - phi1 - phi2;
    const double t3 = 1.0 + phi1 - phi2;
    const double t4 = phi1 * phi1 + phi2 * phi2;
    if (!(t1 > 0.0 && t2 > 0.0 && t3 > 0.0 && t4 > 0.0)) return kInf;
    return w.a * std::log(t1) + w.b * std::log(t2) + w.c * std::log(t3) + w.d * std::log(t4);
}

std::array<double, 2> criterion_minimizer(const CriterionWeights& w) {
    const Objective f = [&](const Point& p) { return dgp_criterion(p[0], p[1], w); };
    return nelder_mead(f, {0.3, 0.0}, 0.1, 5000).x;
}

double msfe_eta_star_raw(double rho1, double rho2) {
    const double den = rho1 * rho1 + rho2 * rho2 - 2.0 * rho1 * rho1 * rho2;
    if (!(den > 0.0)) throw IdentificationError("MSFE combination weight unidentified (rho = 0)");
    return rho1 * rho1 * (1.0 - rho2) / den;
}

double simulated_eta_star(const Ar2Dgp& dgp, Loss loss, std::size_t sim_n, std::uint64_t seed) {
    const Ar2Moments m = ar2_moments(dgp);
    if (dgp.phi1 == 0.0 && dgp.phi2 == 0.0)
        throw IdentificationError("(phi1, phi2) = (0, 0): pseudo-true weight undefined");
    if (sim_n < 10) throw ValidationError("sim_n too small");
    const SeriesSample s = simulate_ar2(dgp, sim_n + 2, kDefaultBurnIn, seed);
    if (loss == Loss::Msfe) {
        const auto g = [&](double eta) { return msfe_eta_foc(s.values, m.rho1, m.rho2, eta); };
        return bracket_root(g);
    }
    const std::vector<double>& y = s.values;
    return bracket_root([&](double eta) {
        double acc = 0.0;
        for (std::size_t i = 2; i < y.size(); ++i)
            acc += log_eta_score(y[i], y[i - 1], y[i - 2], m.rho1, m.rho2, eta);
        return acc / static_cast<double>(y.size() - 2);
    });
}

PseudoTruths population_pseudo_truths(const Ar2Dgp& dgp, Loss loss, std::size_t sim_n,
                                      std::uint64_t seed) {
    const Ar2Moments m = ar2_moments(dgp);
    if (dgp.phi1 == 0.0 && dgp.phi2 == 0.0)
        throw IdentificationError("(phi1, phi2) = (0, 0): pseudo-true weight undefined");
    PseudoTruths pt;
    pt.gamma_star = {m.rho1, m.rho2};
    if (loss == Loss::Msfe)
        pt.eta_star = std::clamp(msfe_eta_star_raw(m.rho1, m.rho2), 0.0, 1.0);
    else
        pt.eta_star = simulated_eta_star(dgp, loss, sim_n, seed);
    return pt;
}

DgpSolution solve_for_eta_star(double target, Loss loss, const SolverOptions& options) {
    if (!(target >= 0.0 && target <= 1.0)) throw ValidationError("target weight must be in [0, 1]");
    if (options.starts.empty()) throw ValidationError("solver needs at least one start");
    const Objective f = [&](const Point& p) { return dgp_criterion(p[0], p[1], options.weights); };

    std::optional<CrnSample> coarse, fine;
    if (loss == Loss::LogScore) {
        coarse.emplace(std::min(options.coarse_sim_n, options.sim_n), options.seed);
        fine.emplace(options.sim_n, options.seed);
    }
    const Constraint c_coarse(loss, target, coarse ? &*coarse : nullptr);
    const Constraint c_fine(loss, target, fine ? &*fine : nullptr);

    struct Candidate {
        AlResult al;
        double crit;
    };
    auto better = [](const Candidate& x, const Candidate& y) {
        if (x.crit != y.crit) return x.crit < y.crit;
        return x.al.x < y.al.x;
    };
    std::optional<Candidate> win;
    double best_residual = kInf;
    for (const Point& start : options.starts) {
        const AlResult r = augmented_lagrangian(f, c_coarse, start, 0.0, 10.0, options.max_outer);
        best_residual = std::min(best_residual, std::abs(r.residual));
        if (!(std::abs(r.residual) < 1e-6)) continue;
        const Candidate cand{r, f(r.x)};
        if (!win || better(cand, *win)) win = cand;
    }
    if (win && loss == Loss::LogScore) {
        const AlResult r = augmented_lagrangian(f, c_fine, win->al.x, win->al.lambda, 1e3,
                                                options.max_outer);
        best_residual = std::abs(r.residual);
        win = std::abs(r.residual) < 1e-6 ? std::optional<Candidate>({r, f(r.x)}) : std::nullopt;
    }
    if (!win)
        throw InfeasibleError("no feasible AR(2) found for target " + std::to_string(target),
                              best_residual);

    DgpSolution sol;
    sol.dgp = unit_variance_dgp(win->al.x[0], win->al.x[1]);
    sol.loss = loss;
    sol.target_eta_star = target;
    const PseudoTruths pt = population_pseudo_truths(sol.dgp, loss, options.sim_n, options.seed);
    sol.achieved_eta_star = pt.eta_star;
    sol.gamma_star = pt.gamma_star;
    sol.criterion_value = win->crit;
    sol.constraint_residuals = {win->al.residual, ar2_moments(sol.dgp).variance - 1.0};
    sol.sim_n = loss == Loss::LogScore ? options.sim_n : 0;
    sol.seed = options.seed;
    if (std::abs(sol.achieved_eta_star - target) > options.tolerance)
        throw InfeasibleError("achieved weight " + std::to_string(sol.achieved_eta_star) +
                                  " misses target " + std::to_string(target),
                              std::abs(sol.achieved_eta_star - target));
    return sol;
}

}  // namespace fcomb
