#include "fcomb/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fcomb/errors.hpp"

namespace fcomb {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

struct Derivs2 {
    double loss;
    double g[3];
    double h[3][3];
};

// Analytic loss, gradient and Hessian at one target for K = 2; order (eta, gamma1, gamma2).
Derivs2 pointwise2(Loss loss, double eta, double g1, double g2, double y, double x1,
                   double x2, bool want_hessian) {
    Derivs2 d{};
    if (loss == Loss::Msfe) {
        const double a = g1 * x1 - g2 * x2;
        const double e = eta * a + g2 * x2 - y;
        d.loss = e * e;
        d.g[0] = 2.0 * e * a;
        d.g[1] = 2.0 * e * eta * x1;
        d.g[2] = 2.0 * e * (1.0 - eta) * x2;
        if (want_hessian) {
            d.h[0][0] = 2.0 * a * a;
            d.h[0][1] = 2.0 * (a * eta * x1 + e * x1);
            d.h[0][2] = 2.0 * (a * (1.0 - eta) * x2 - e * x2);
            d.h[1][1] = 2.0 * eta * eta * x1 * x1;
            d.h[1][2] = 2.0 * eta * (1.0 - eta) * x1 * x2;
            d.h[2][2] = 2.0 * (1.0 - eta) * (1.0 - eta) * x2 * x2;
        }
    } else {
        const double u1 = y - g1 * x1;
        const double u2 = y - g2 * x2;
        const double l1 = -0.5 * u1 * u1;
        const double l2 = -0.5 * u2 * u2;
        double shift;
        if (eta <= 0.0) shift = l2;
        else if (eta >= 1.0) shift = l1;
        else shift = std::max(l1, l2);
        const double f1 = std::exp(l1 - shift);
        const double f2 = std::exp(l2 - shift);
        const double m = eta * f1 + (1.0 - eta) * f2;
        d.loss = kHalfLog2Pi - (shift + std::log(m));
        const double D = f1 - f2;
        const double df1 = f1 * u1 * x1;
        const double df2 = f2 * u2 * x2;
        const double m1 = eta * df1;
        const double m2 = (1.0 - eta) * df2;
        d.g[0] = -D / m;
        d.g[1] = -m1 / m;
        d.g[2] = -m2 / m;
        if (want_hessian) {
            const double m_sq = m * m;
            d.h[0][0] = D * D / m_sq;
            d.h[0][1] = -df1 / m + D * m1 / m_sq;
            d.h[0][2] = df2 / m + D * m2 / m_sq;
            d.h[1][1] = -eta * f1 * x1 * x1 * (u1 * u1 - 1.0) / m + m1 * m1 / m_sq;
            d.h[1][2] = m1 * m2 / m_sq;
            d.h[2][2] = -(1.0 - eta) * f2 * x2 * x2 * (u2 * u2 - 1.0) / m + m2 * m2 / m_sq;
        }
    }
    if (want_hessian) {
        d.h[1][0] = d.h[0][1];
        d.h[2][0] = d.h[0][2];
        d.h[2][1] = d.h[1][2];
    }
    return d;
}

std::vector<double> pack(const PoolParams& theta) {
    std::vector<double> v(theta.eta);
    v.insert(v.end(), theta.gamma.begin(), theta.gamma.end());
    return v;
}

PoolParams unpack(const std::vector<double>& v, std::size_t k) {
    PoolParams p;
    p.eta.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1));
    p.gamma.assign(v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
    return p;
}

double raw_loss(Loss loss, const std::vector<double>& w, const std::vector<double>& gamma,
                double y, std::span<const double> lags) {
    const std::size_t k = gamma.size();
    if (loss == Loss::Msfe) {
        double mu = 0.0;
        for (std::size_t j = 0; j < k; ++j) mu += w[j] * gamma[j] * lags[j];
        const double e = mu - y;
        return e * e;
    }
    double shift = -std::numeric_limits<double>::infinity();
    std::vector<double> lj(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double u = y - gamma[j] * lags[j];
        lj[j] = -0.5 * u * u;
        if (w[j] > 0.0) shift = std::max(shift, lj[j]);
    }
    double m = 0.0;
    for (std::size_t j = 0; j < k; ++j)
        if (w[j] > 0.0) m += w[j] * std::exp(lj[j] - shift);
    return kHalfLog2Pi - (shift + std::log(m));
}

// Free-coordinate weights extended to all of R^{K-1}; used only for finite differences.
double loss_free(Loss loss, const std::vector<double>& v, std::size_t k, double y,
                 std::span<const double> lags) {
    std::vector<double> w(k);
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
        w[j] = v[j];
        s += v[j];
    }
    w[k - 1] = 1.0 - s;
    std::vector<double> gamma(v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
    if (loss == Loss::Msfe) return raw_loss(loss, w, gamma, y, lags);
    // Mixture needs non-negative weights; clamp and let the one-sided stencil handle edges.
    for (double& x : w) x = std::max(x, 0.0);
    return raw_loss(loss, w, gamma, y, lags);
}

std::vector<double> numeric_gradient(Loss loss, const PoolParams& theta, double y,
                                     std::span<const double> lags) {
    const std::size_t k = theta.k();
    std::vector<double> v = pack(theta);
    std::vector<double> g(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double h = 1e-6 * std::max(1.0, std::abs(v[i]));
        const double x0 = v[i];
        const bool weight = i + 1 < k;
        double up = x0 + h, dn = x0 - h;
        if (weight && loss == Loss::LogScore) {
            double others = 0.0;
            for (std::size_t j = 0; j + 1 < k; ++j)
                if (j != i) others += v[j];
            if (dn < 0.0) dn = x0;
            if (up + others > 1.0) up = x0;
        }
        v[i] = up;
        const double fu = loss_free(loss, v, k, y, lags);
        v[i] = dn;
        const double fd = loss_free(loss, v, k, y, lags);
        v[i] = x0;
        g[i] = (fu - fd) / (up - dn);
    }
    return g;
}

double unchecked_loss(Loss loss, const PoolParams& theta, const std::vector<double>& w, double y,
                      std::span<const double> lags) {
    if (theta.k() == 2)
        return pointwise2(loss, theta.eta[0], theta.gamma[0], theta.gamma[1], y, lags[0], lags[1],
                          false)
            .loss;
    return raw_loss(loss, w, theta.gamma, y, lags);
}

void check_window(const PoolParams& theta, const SampleWindow& window) {
    theta.validate();
    window.validate(theta.k());
}

}  // namespace

std::string_view to_string(Loss loss) {
    return loss == Loss::Msfe ? "msfe" : "log";
}

Loss parse_loss(std::string_view text) {
    if (text == "msfe") return Loss::Msfe;
    if (text == "log" || text == "logscore") return Loss::LogScore;
    throw ValidationError("unknown loss '" + std::string(text) + "' (expected msfe or log)");
}

PoolParams PoolParams::two(double eta1, double gamma1, double gamma2) {
    return PoolParams{{eta1}, {gamma1, gamma2}};
}

double PoolParams::weight(std::size_t j) const {
    if (j + 1 < k()) return eta[j];
    double s = 0.0;
    for (double e : eta) s += e;
    return 1.0 - s;
}

std::vector<double> PoolParams::weights() const {
    std::vector<double> w(k());
    for (std::size_t j = 0; j < k(); ++j) w[j] = weight(j);
    return w;
}

void PoolParams::validate() const {
    if (gamma.size() < 2) throw ValidationError("a pool needs at least two constituents");
    if (eta.size() + 1 != gamma.size())
        throw ValidationError("weight vector must hold K-1 free coordinates");
    double s = 0.0;
    for (double e : eta) {
        if (!std::isfinite(e) || e < 0.0 || e > 1.0)
            throw ValidationError("combination weights must lie in [0, 1]");
        s += e;
    }
    if (s > 1.0 + 1e-12) throw ValidationError("combination weights must sum to 1");
    for (double g : gamma)
        if (!std::isfinite(g)) throw ValidationError("constituent coefficients must be finite");
}

SplitScheme SplitScheme::halves(std::size_t total) {
    if (total % 2 != 0)
        throw ValidationError("T+1 = " + std::to_string(total) + " must be even for R = P");
    SplitScheme s{total / 2, total / 2};
    s.validate();
    return s;
}

void SplitScheme::validate() const {
    if (r < 3) throw ValidationError("in-sample size R must be at least 3");
    if (p < 1) throw ValidationError("out-of-sample size P must be at least 1");
}

void SampleWindow::validate(std::size_t max_lag) const {
    if (first < max_lag) throw ValidationError("window starts before the available lags");
    if (last > y.size() || first >= last) throw ValidationError("empty or out-of-range window");
}

SampleWindow SampleWindow::whole(std::span<const double> y, std::size_t max_lag) {
    if (y.size() <= max_lag) throw ValidationError("series too short for the lag structure");
    return {y, max_lag, y.size()};
}

SampleWindow SampleWindow::in_sample(std::span<const double> y, const SplitScheme& split,
                                     std::size_t max_lag) {
    split.validate();
    if (y.size() != split.total()) throw ValidationError("series length differs from R + P");
    if (split.r <= max_lag) throw ValidationError("in-sample block too short");
    return {y, max_lag, split.r};
}

SampleWindow SampleWindow::out_of_sample(std::span<const double> y, const SplitScheme& split) {
    split.validate();
    if (y.size() != split.total()) throw ValidationError("series length differs from R + P");
    return {y, split.r, split.total()};
}

double combination_loss(Loss loss, const PoolParams& theta, double y,
                        std::span<const double> lags) {
    theta.validate();
    if (lags.size() < theta.k()) throw ValidationError("need one lag per constituent");
    return unchecked_loss(loss, theta, theta.weights(), y, lags);
}

namespace {

template <class F>
void for_each_target(const SampleWindow& w, std::size_t k, F&& f) {
    std::vector<double> lags(k);
    for (std::size_t t = w.first; t < w.last; ++t) {
        for (std::size_t j = 0; j < k; ++j) lags[j] = w.y[t - 1 - j];
        f(t - w.first, w.y[t], std::span<const double>(lags));
    }
}

}  // namespace

LossSeries out_of_sample_losses(Loss loss, const PoolParams& theta,
                                std::span<const double> series, const SplitScheme& split) {
    const SampleWindow w = SampleWindow::out_of_sample(series, split);
    check_window(theta, w);
    LossSeries out;
    out.split = split;
    out.losses.resize(w.size());
    const auto weights = theta.weights();
    for_each_target(w, theta.k(), [&](std::size_t i, double y, std::span<const double> lags) {
        out.losses[i] = unchecked_loss(loss, theta, weights, y, lags);
    });
    return out;
}

double average_loss(Loss loss, const PoolParams& theta, const SampleWindow& window) {
    check_window(theta, window);
    double s = 0.0;
    const auto weights = theta.weights();
    for_each_target(window, theta.k(), [&](std::size_t, double y, std::span<const double> lags) {
        s += unchecked_loss(loss, theta, weights, y, lags);
    });
    return s / static_cast<double>(window.size());
}

Eigen::MatrixXd per_period_gradients(Loss loss, const PoolParams& theta,
                                     const SampleWindow& window) {
    check_window(theta, window);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(window.size()),
                        static_cast<Eigen::Index>(theta.free_dim()));
    for_each_target(window, theta.k(), [&](std::size_t i, double y, std::span<const double> lags) {
        const auto row = static_cast<Eigen::Index>(i);
        if (theta.k() == 2) {
            const Derivs2 d = pointwise2(loss, theta.eta[0], theta.gamma[0], theta.gamma[1], y,
                                         lags[0], lags[1], false);
            out(row, 0) = d.g[0];
            out(row, 1) = d.g[1];
            out(row, 2) = d.g[2];
        } else {
            const auto g = numeric_gradient(loss, theta, y, lags);
            for (std::size_t c = 0; c < g.size(); ++c) out(row, static_cast<Eigen::Index>(c)) = g[c];
        }
    });
    return out;
}

ScoreGradient score_gradient(Loss loss, const PoolParams& theta, const SampleWindow& window) {
    const Eigen::MatrixXd g = per_period_gradients(loss, theta, window);
    const Eigen::VectorXd s = g.colwise().sum().transpose();
    const auto ke = static_cast<Eigen::Index>(theta.eta.size());
    return {s.head(ke), s.tail(static_cast<Eigen::Index>(theta.k()))};
}

Eigen::MatrixXd full_hessian(Loss loss, const PoolParams& theta, const SampleWindow& window) {
    check_window(theta, window);
    const auto dim = static_cast<Eigen::Index>(theta.free_dim());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    if (theta.k() == 2) {
        for_each_target(window, 2, [&](std::size_t, double y, std::span<const double> lags) {
            const Derivs2 d = pointwise2(loss, theta.eta[0], theta.gamma[0], theta.gamma[1], y,
                                         lags[0], lags[1], true);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) h(i, j) += d.h[i][j];
        });
        return h / static_cast<double>(window.size());
    }
    // Central differences of the averaged numeric gradient.
    std::vector<double> v = pack(theta);
    for (Eigen::Index c = 0; c < dim; ++c) {
        const auto ci = static_cast<std::size_t>(c);
        const double step = 1e-4 * std::max(1.0, std::abs(v[ci]));
        const double x0 = v[ci];
        v[ci] = x0 + step;
        const Eigen::VectorXd gu =
            per_period_gradients(loss, unpack(v, theta.k()), window).colwise().mean().transpose();
        v[ci] = x0 - step;
        const Eigen::VectorXd gd =
            per_period_gradients(loss, unpack(v, theta.k()), window).colwise().mean().transpose();
        v[ci] = x0;
        h.col(c) = (gu - gd) / (2.0 * step);
    }
    return 0.5 * (h + h.transpose());
}

HessianBlocks hessian_blocks(Loss loss, const PoolParams& theta, const SampleWindow& window) {
    const Eigen::MatrixXd h = full_hessian(loss, theta, window);
    const auto ke = static_cast<Eigen::Index>(theta.eta.size());
    const auto kg = static_cast<Eigen::Index>(theta.k());
    return {h.topLeftCorner(ke, ke), h.topRightCorner(ke, kg)};
}

}  // namespace fcomb
