#include "fcomb/estimation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>

#include "fcomb/errors.hpp"

namespace fcomb {

namespace {


struct Lagged {
    std::vector<double> y, x1, x2;
};

Lagged lagged(const SampleWindow& w) {
    w.validate(2);
    Lagged d;
    d.y.reserve(w.size());
    d.x1.reserve(w.size());
    d.x2.reserve(w.size());
    for (std::size_t t = w.first; t < w.last; ++t) {
        d.y.push_back(w.y[t]);
        d.x1.push_back(w.y[t - 1]);
        d.x2.push_back(w.y[t - 2]);
    }
    return d;
}

double snap(double eta) {
    if (eta < kSnapThreshold) return 0.0;
    if (eta > 1.0 - kSnapThreshold) return 1.0;
    return eta;
}

// Component densities scaled by a per-target shift, for the eta-only problem.
struct MixtureTerms {
    std::vector<double> f1, f2, shift;
};

MixtureTerms mixture_terms(const Lagged& d, double g1, double g2) {
    const std::size_t n = d.y.size();
    MixtureTerms m{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const double u1 = d.y[i] - g1 * d.x1[i];
        const double u2 = d.y[i] - g2 * d.x2[i];
        const double l1 = -0.5 * u1 * u1;
        const double l2 = -0.5 * u2 * u2;
        const double s = std::max(l1, l2);
        m.f1[i] = std::exp(l1 - s);
        m.f2[i] = std::exp(l2 - s);
        m.shift[i] = s;
    }
    return m;
}

// Average log-likelihood of the eta-mixture, dropping the normal constant.
double mixture_loglik(const MixtureTerms& m, double eta) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.f1.size(); ++i) {
        const double mix = eta * m.f1[i] + (1.0 - eta) * m.f2[i];
        s += m.shift[i] + std::log(mix);
    }
    return s / static_cast<double>(m.f1.size());
}

struct EtaDerivs {
    double grad;  // of the average loss
    double curv;
};

EtaDerivs mixture_eta_derivs(const MixtureTerms& m, double eta) {
    double g = 0.0, h = 0.0;
    for (std::size_t i = 0; i < m.f1.size(); ++i) {
        const double mix = eta * m.f1[i] + (1.0 - eta) * m.f2[i];
        const double r = (m.f1[i] - m.f2[i]) / mix;
        g -= r;
        h += r * r;
    }
    const double n = static_cast<double>(m.f1.size());
    return {g / n, h / n};
}

// Newton on the convex eta-only log-loss; steps are kept only when the loss falls.
double polish_eta(const MixtureTerms& m, double eta) {
    double ll = mixture_loglik(m, eta);
    for (int it = 0; it < 50; ++it) {
        const EtaDerivs d = mixture_eta_derivs(m, eta);
        if (std::abs(d.grad) < 1e-13) break;
        if ((eta <= 0.0 && d.grad > 0.0) || (eta >= 1.0 && d.grad < 0.0)) break;
        if (!(d.curv > 0.0)) break;
        double step = -d.grad / d.curv;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            const double cand = std::clamp(eta + step, 0.0, 1.0);
            const double ll_c = mixture_loglik(m, cand);
            if (ll_c >= ll) {
                moved = cand != eta;
                eta = cand;
                ll = ll_c;
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return eta;
}

struct EmRun {
    double eta;
    std::size_t iterations;
    bool hit_limit;
};

EmRun em_eta(const MixtureTerms& m, double eta, const EmOptions& opt) {
    const double n = static_cast<double>(m.f1.size());
    double ll = mixture_loglik(m, eta);
    if (opt.trace) opt.trace->push_back(ll);
    std::size_t it = 0;
    for (; it < opt.max_iterations; ++it) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.f1.size(); ++i) {
            const double a = eta * m.f1[i];
            s += a / (a + (1.0 - eta) * m.f2[i]);
        }
        eta = snap(s / n);
        const double ll_new = mixture_loglik(m, eta);
        if (opt.trace) opt.trace->push_back(ll_new);
        const double gain = ll_new - ll;
        ll = ll_new;
        if (gain < opt.tolerance || eta == 0.0 || eta == 1.0) {
            ++it;
            return {eta, it, false};
        }
    }
    return {eta, it, true};
}

bool boundary(double eta) { return eta <= 0.0 || eta >= 1.0; }

double eta_gradient_avg(Loss loss, const PoolParams& theta, const SampleWindow& w) {
    return score_gradient(loss, theta, w).eta(0) / static_cast<double>(w.size());
}

// Joint EM state for the one-step log-score problem.
struct JointState {
    double eta, g1, g2;
};

double joint_loglik(const Lagged& d, const JointState& s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d.y.size(); ++i) {
        const double u1 = d.y[i] - s.g1 * d.x1[i];
        const double u2 = d.y[i] - s.g2 * d.x2[i];
        const double l1 = -0.5 * u1 * u1;
        const double l2 = -0.5 * u2 * u2;
        double sh;
        if (s.eta <= 0.0) sh = l2;
        else if (s.eta >= 1.0) sh = l1;
        else sh = std::max(l1, l2);
        acc += sh + std::log(s.eta * std::exp(l1 - sh) + (1.0 - s.eta) * std::exp(l2 - sh));
    }
    return acc / static_cast<double>(d.y.size());
}

struct JointRun {
    JointState state;
    double loglik;
    std::size_t iterations;
    bool hit_limit;
};

JointRun em_joint(const Lagged& d, JointState s, const EmOptions& opt) {
    const std::size_t n = d.y.size();
    double ll = joint_loglik(d, s);
    if (opt.trace) opt.trace->push_back(ll);
    std::size_t it = 0;
    for (; it < opt.max_iterations; ++it) {
        double sw = 0.0, n1 = 0.0, d1 = 0.0, n2 = 0.0, d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u1 = d.y[i] - s.g1 * d.x1[i];
            const double u2 = d.y[i] - s.g2 * d.x2[i];
            const double l1 = -0.5 * u1 * u1;
            const double l2 = -0.5 * u2 * u2;
            const double sh = std::max(l1, l2);
            const double a = s.eta * std::exp(l1 - sh);
            const double b = (1.0 - s.eta) * std::exp(l2 - sh);
            const double w = a / (a + b);
            sw += w;
            n1 += w * d.y[i] * d.x1[i];
            d1 += w * d.x1[i] * d.x1[i];
            n2 += (1.0 - w) * d.y[i] * d.x2[i];
            d2 += (1.0 - w) * d.x2[i] * d.x2[i];
        }
        JointState next{snap(sw / static_cast<double>(n)), s.g1, s.g2};
        if (d1 > 0.0) next.g1 = n1 / d1;
        if (d2 > 0.0) next.g2 = n2 / d2;
        const double ll_new = joint_loglik(d, next);
        if (opt.trace) opt.trace->push_back(ll_new);
        const double gain = ll_new - ll;
        s = next;
        ll = ll_new;
        if (gain < opt.tolerance) return {s, ll, it + 1, false};
    }
    return {s, ll, it, true};
}

JointRun polish_joint(Loss loss, const SampleWindow& w, const Lagged& d, JointRun run) {
    if (boundary(run.state.eta)) return run;
    for (int it = 0; it < 30; ++it) {
        const PoolParams theta = PoolParams::two(run.state.eta, run.state.g1, run.state.g2);
        const ScoreGradient sg = score_gradient(loss, theta, w);
        Eigen::Vector3d g(sg.eta(0), sg.gamma(0), sg.gamma(1));
        g /= static_cast<double>(w.size());
        if (g.norm() < 1e-13) break;
        const Eigen::Matrix3d h = full_hessian(loss, theta, w);
        Eigen::LLT<Eigen::Matrix3d> llt(h);
        if (llt.info() != Eigen::Success) break;
        Eigen::Vector3d step = -llt.solve(g);
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            JointState cand{run.state.eta + step(0), run.state.g1 + step(1),
                            run.state.g2 + step(2)};
            if (cand.eta > 0.0 && cand.eta < 1.0) {
                const double ll_c = joint_loglik(d, cand);
                if (ll_c >= run.loglik) {
                    run.state = cand;
                    run.loglik = ll_c;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    return run;
}

FitResult finish(Loss loss, const SampleWindow& w, PoolParams theta, bool converged,
                 std::size_t iterations, std::size_t starts,
                 std::optional<std::string> note) {
    FitResult r;
    r.in_sample_avg_loss = average_loss(loss, theta, w);
    r.theta = std::move(theta);
    r.converged = converged;
    r.iterations = iterations;
    r.multi_start_best_of = starts;
    r.identified_set_note = std::move(note);
    return r;
}

}  // namespace

void EstimationMethod::validate() const {
    if (kind != Kind::TwoStepFixed) return;
    if (eta.empty()) throw ValidationError("fixed method needs a weight");
    double s = 0.0;
    for (double e : eta) {
        if (!(e >= 0.0 && e <= 1.0)) throw ValidationError("fixed weight outside [0, 1]");
        s += e;
    }
    if (s > 1.0 + 1e-12) throw ValidationError("fixed weights sum above 1");
}

std::string to_string(const EstimationMethod& method) {
    switch (method.kind) {
        case EstimationMethod::Kind::OneStep: return "one-step";
        case EstimationMethod::Kind::TwoStepOptimal: return "two-step";
        case EstimationMethod::Kind::TwoStepFixed: {
            char buf[40];
            auto res = std::to_chars(buf, buf + sizeof buf, method.eta.at(0));
            return "fixed:" + std::string(buf, res.ptr);
        }
    }
    return {};
}

EstimationMethod parse_method(std::string_view text) {
    if (text == "one-step") return EstimationMethod::one_step();
    if (text == "two-step") return EstimationMethod::two_step();
    if (text == "equal") return EstimationMethod::equal_weights();
    if (text.starts_with("fixed:")) {
        const std::string_view num = text.substr(6);
        double v = 0.0;
        auto res = std::from_chars(num.data(), num.data() + num.size(), v);
        if (res.ec != std::errc{} || res.ptr != num.data() + num.size())
            throw ValidationError("bad fixed weight in '" + std::string(text) + "'");
        EstimationMethod m = EstimationMethod::fixed(v);
        m.validate();
        return m;
    }
    throw ValidationError("unknown estimation method '" + std::string(text) +
                          "' (one-step, two-step, equal, fixed:<eta>)");
}

std::vector<double> fit_constituents(Loss, const SampleWindow& window, std::size_t k) {
    window.validate(k);
    std::vector<double> gamma(k);
    for (std::size_t j = 1; j <= k; ++j) {
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t t = window.first; t < window.last; ++t) {
            const double x = window.y[t - j];
            sxy += window.y[t] * x;
            sxx += x * x;
        }
        if (!(sxx > 0.0))
            throw DegenerateDataError("lag-" + std::to_string(j) + " regressor has zero sum of squares");
        gamma[j - 1] = sxy / sxx;
    }
    return gamma;
}

PoolParams make_fixed(const std::vector<double>& eta, const std::vector<double>& gamma) {
    PoolParams p;
    p.gamma = gamma;
    if (eta.size() == gamma.size()) {
        double s = 0.0;
        for (double e : eta) s += e;
        if (std::abs(s - 1.0) > 1e-12) throw ValidationError("weights must sum to 1");
        p.eta.assign(eta.begin(), eta.end() - 1);
    } else {
        p.eta = eta;
    }
    p.validate();
    return p;
}

FitResult fit_two_step(Loss loss, const SampleWindow& window, const EmOptions& options) {
    const std::vector<double> gamma = fit_constituents(loss, window);
    const Lagged d = lagged(window);
    const std::size_t n = d.y.size();

    if (loss == Loss::Msfe) {
        double saa = 0.0, sab = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = gamma[0] * d.x1[i] - gamma[1] * d.x2[i];
            const double b = gamma[1] * d.x2[i] - d.y[i];
            saa += a * a;
            sab += a * b;
        }
        if (!(saa > 0.0))
            return finish(loss, window, PoolParams::two(0.5, gamma[0], gamma[1]), true, 0, 1,
                          "combination weight unidentified: constituent forecasts coincide");
        const double eta = std::clamp(-sab / saa, 0.0, 1.0);
        return finish(loss, window, PoolParams::two(eta, gamma[0], gamma[1]), true, 0, 1,
                      std::nullopt);
    }

    const MixtureTerms m = mixture_terms(d, gamma[0], gamma[1]);
    bool identical = true;
    for (std::size_t i = 0; i < n && identical; ++i) identical = m.f1[i] == m.f2[i];
    if (identical)
        return finish(loss, window, PoolParams::two(0.5, gamma[0], gamma[1]), true, 0, 1,
                      "combination weight unidentified: constituent densities coincide");

    EmRun run = em_eta(m, 0.5, options);
    double eta = run.eta;
    if (options.newton_polish) eta = polish_eta(m, eta);
    const PoolParams theta = PoolParams::two(eta, gamma[0], gamma[1]);
    const double g = eta_gradient_avg(loss, theta, window);
    const bool ok = boundary(eta) || std::abs(g) <= kGradientTolerance;
    return finish(loss, window, theta, ok, run.iterations, 1, std::nullopt);
}

FitResult fit_one_step(Loss loss, const SampleWindow& window, const EmOptions& options) {
    const Lagged d = lagged(window);
    const std::size_t n = d.y.size();

    if (loss == Loss::Msfe) {
        Eigen::Matrix2d xx = Eigen::Matrix2d::Zero();
        Eigen::Vector2d xy = Eigen::Vector2d::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const Eigen::Vector2d x(d.x1[i], d.x2[i]);
            xx += x * x.transpose();
            xy += x * d.y[i];
        }
        Eigen::FullPivLU<Eigen::Matrix2d> lu(xx);
        if (lu.rank() < 2) throw RankDeficiencyError("lagged regressors are collinear");
        const Eigen::Vector2d beta = lu.solve(xy);
        const double s = std::abs(beta(0)) + std::abs(beta(1));
        double eta = 0.5, g1 = 0.0, g2 = 0.0;
        if (s > 0.0) {
            eta = std::abs(beta(0)) / s;
            g1 = eta > 0.0 ? beta(0) / eta : 0.0;
            g2 = eta < 1.0 ? beta(1) / (1.0 - eta) : 0.0;
        }
        return finish(loss, window, PoolParams::two(eta, g1, g2), true, 0, 1,
                      "pooled mean identifies only (eta*gamma1, (1-eta)*gamma2); canonical "
                      "eta = |b1|/(|b1|+|b2|)");
    }

    const std::vector<double> g0 = fit_constituents(loss, window);
    if (options.starts.empty()) throw ValidationError("EM needs at least one start");
    std::optional<JointRun> best;
    std::size_t total_iterations = 0;
    bool limit = false;
    for (double start : options.starts) {
        JointRun run = em_joint(d, {start, g0[0], g0[1]}, options);
        total_iterations += run.iterations;
        if (options.newton_polish) run = polish_joint(loss, window, d, run);
        if (!best || run.loglik > best->loglik) {
            best = run;
            limit = run.hit_limit;
        }
    }
    const PoolParams theta = PoolParams::two(best->state.eta, best->state.g1, best->state.g2);
    bool ok = true;
    if (!boundary(best->state.eta)) {
        const ScoreGradient sg = score_gradient(loss, theta, window);
        const double norm = std::sqrt(sg.eta.squaredNorm() + sg.gamma.squaredNorm()) /
                            static_cast<double>(n);
        ok = norm <= kGradientTolerance;
    }
    ok = ok && !limit;
    return finish(loss, window, theta, ok, total_iterations, options.starts.size(), std::nullopt);
}

FitResult fit_method(const EstimationMethod& method, Loss loss, const SampleWindow& window) {
    method.validate();
    switch (method.kind) {
        case EstimationMethod::Kind::OneStep: return fit_one_step(loss, window);
        case EstimationMethod::Kind::TwoStepOptimal: return fit_two_step(loss, window);
        case EstimationMethod::Kind::TwoStepFixed: {
            const auto gamma = fit_constituents(loss, window);
            return finish(loss, window, make_fixed(method.eta, gamma), true, 0, 1, std::nullopt);
        }
    }
    throw ValidationError("unknown estimation method");
}

}  // namespace fcomb
