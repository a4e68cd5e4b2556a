#include "fcomb/inference.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "fcomb/errors.hpp"
#include "fcomb/estimation.hpp"
#include "fcomb/rng.hpp"

namespace fcomb {

namespace {

constexpr std::size_t kDrawBlock = 256;
constexpr Eigen::Index kFftThreshold = 8192;

// Biased autocovariances n^{-1} sum x_t x_{t-j} for j = 0..n-1 via a zero-padded FFT.
std::vector<double> autocov_fft(const Eigen::VectorXd& x) {
    const auto n = static_cast<std::size_t>(x.size());
    std::size_t m = 1;
    while (m < 2 * n) m <<= 1;
    std::vector<double> padded(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) padded[i] = x(static_cast<Eigen::Index>(i));
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> power;
    fft.fwd(power, padded);
    for (auto& c : power) c = std::norm(c);
    std::vector<double> back;
    fft.inv(back, power);
    back.resize(n);
    for (double& v : back) v /= static_cast<double>(n);
    return back;
}

double bandwidth_for(std::size_t n_block, std::size_t n_total, BandwidthBase base) {
    return std::sqrt(static_cast<double>(base == BandwidthBase::P ? n_block : n_total));
}

void check_pair(const LossSeries& bench, const LossSeries& alt) {
    if (!(bench.split == alt.split)) throw ValidationError("loss series come from different splits");
    if (bench.losses.size() != alt.losses.size())
        throw ValidationError("loss series have different lengths");
    if (bench.losses.empty()) throw ValidationError("empty loss series");
}

std::vector<double> differences(const LossSeries& bench, const LossSeries& alt) {
    std::vector<double> d(bench.losses.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = bench.losses[i] - alt.losses[i];
    return d;
}

double normal_cdf(double x) {
    return boost::math::cdf(boost::math::normal_distribution<double>(), x);
}

// Factor L with L L' equal to the covariance after clipping negative eigenvalues.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
    const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd projected = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(projected);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
}

struct ConstituentScores {
    Eigen::MatrixXd s;     // n x 2
    Eigen::Vector2d hess;  // window-average second derivatives
};

ConstituentScores constituent_scores(Loss loss, const std::vector<double>& gamma,
                                     const SampleWindow& w) {
    const double scale = loss == Loss::Msfe ? 2.0 : 1.0;
    ConstituentScores c{Eigen::MatrixXd(static_cast<Eigen::Index>(w.size()), 2),
                        Eigen::Vector2d::Zero()};
    for (std::size_t t = w.first; t < w.last; ++t) {
        const auto row = static_cast<Eigen::Index>(t - w.first);
        for (int j = 0; j < 2; ++j) {
            const double x = w.y[t - 1 - static_cast<std::size_t>(j)];
            c.s(row, j) = scale * x * (gamma[static_cast<std::size_t>(j)] * x - w.y[t]);
            c.hess(j) += scale * x * x;
        }
    }
    c.hess /= static_cast<double>(w.size());
    return c;
}

}  // namespace

std::string_view to_string(CvMethod method) {
    switch (method) {
        case CvMethod::StandardNormal: return "standard_normal";
        case CvMethod::SimulatedTwoStep: return "simulated_two_step";
        case CvMethod::TwoSidedNormal: return "two_sided_normal";
    }
    return "";
}

void SimulatedCvModel::validate() const {
    const auto k = m_etaeta.rows();
    if (k < 1 || m_etaeta.cols() != k) throw ValidationError("M_etaeta must be square");
    if (m_etagamma.rows() != k) throw ValidationError("M_etagamma row count mismatch");
    if (sigma_x.rows() != k || sigma_x.cols() != k) throw ValidationError("Sigma_X shape mismatch");
    if (sigma_z.rows() != m_etagamma.cols() || sigma_z.cols() != m_etagamma.cols())
        throw ValidationError("Sigma_Z shape mismatch");
    if (!(ratio_p_over_r > 0.0)) throw ValidationError("P/R must be positive");
    if (draws_h < 1000) throw ValidationError("draws_h must be at least 1000");
    if (!sigma_x.isApprox(sigma_x.transpose()) || !sigma_z.isApprox(sigma_z.transpose()))
        throw ValidationError("covariance matrices must be symmetric");
}

double average_loss_difference(const LossSeries& bench, const LossSeries& alt) {
    check_pair(bench, alt);
    double s = 0.0;
    for (std::size_t i = 0; i < bench.losses.size(); ++i) s += bench.losses[i] - alt.losses[i];
    return s / static_cast<double>(bench.losses.size());
}

double qs_kernel(double x) {
    const double z = 6.0 * std::numbers::pi * x / 5.0;
    if (std::abs(z) < 0.1) {
        // Taylor series; the closed form cancels badly near 0
        const double z2 = z * z;
        return 1.0 - z2 / 10.0 + z2 * z2 / 280.0 - z2 * z2 * z2 / 15120.0;
    }
    return 25.0 / (12.0 * std::numbers::pi * std::numbers::pi * x * x) *
           (std::sin(z) / z - std::cos(z));
}

LrvEstimate hac_lrv(std::span<const double> d, double bandwidth) {
    if (d.size() < 2) throw ValidationError("HAC needs at least two observations");
    if (!(bandwidth > 0.0)) throw ValidationError("HAC bandwidth must be positive");
    const auto n = static_cast<Eigen::Index>(d.size());
    const Eigen::Map<const Eigen::VectorXd> raw(d.data(), n);
    const double mean = raw.mean();
    const Eigen::VectorXd x = raw.array() - mean;
    if (x.cwiseAbs().maxCoeff() <= 1e-14 * raw.cwiseAbs().maxCoeff()) return {0.0, false};

    double value = 0.0;
    if (n > kFftThreshold) {
        const std::vector<double> acov = autocov_fft(x);
        value = acov[0];
        for (Eigen::Index j = 1; j < n; ++j)
            value += 2.0 * qs_kernel(static_cast<double>(j) / bandwidth) *
                     acov[static_cast<std::size_t>(j)];
    } else {
        value = x.squaredNorm();
        for (Eigen::Index j = 1; j < n; ++j) {
            const double w = qs_kernel(static_cast<double>(j) / bandwidth);
            value += 2.0 * w * x.tail(n - j).dot(x.head(n - j));
        }
        value /= static_cast<double>(n);
    }
    if (value < 0.0) return {0.0, true};
    return {value, false};
}

Eigen::MatrixXd hac_lrv_matrix(const Eigen::MatrixXd& rows, double bandwidth) {
    if (rows.rows() < 2) throw ValidationError("HAC needs at least two observations");
    if (!(bandwidth > 0.0)) throw ValidationError("HAC bandwidth must be positive");
    const Eigen::Index n = rows.rows();
    const Eigen::MatrixXd x = rows.rowwise() - rows.colwise().mean();
    Eigen::MatrixXd omega = x.transpose() * x;
    for (Eigen::Index j = 1; j < n; ++j) {
        const double w = qs_kernel(static_cast<double>(j) / bandwidth);
        const Eigen::MatrixXd g = x.bottomRows(n - j).transpose() * x.topRows(n - j);
        omega += w * (g + g.transpose());
    }
    omega /= static_cast<double>(n);
    return 0.5 * (omega + omega.transpose());
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantile level must be in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

TestOutcome standard_test(const LossSeries& bench, const LossSeries& alt, double alpha,
                          BandwidthBase base) {
    check_pair(bench, alt);
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    const std::vector<double> d = differences(bench, alt);
    const std::size_t p = d.size();
    if (p < 2) throw ValidationError("standard test needs P >= 2");

    TestOutcome out;
    out.cv_method = CvMethod::StandardNormal;
    out.alpha = alpha;
    out.delta_p = average_loss_difference(bench, alt);
    const LrvEstimate lrv = hac_lrv(d, bandwidth_for(p, bench.split.total(), base));
    out.omega_hat = lrv.value;
    out.omega_floored = lrv.floored;
    out.d_p = lrv.value > 0.0
                  ? std::sqrt(static_cast<double>(p)) * out.delta_p / std::sqrt(lrv.value)
                  : 0.0;
    out.critical_value = normal_quantile(1.0 - alpha);
    out.p_value = 1.0 - normal_cdf(out.d_p);
    out.reject = out.d_p > out.critical_value;
    return out;
}

SimulatedCvModel estimate_cv_model(Loss loss, const PoolParams& benchmark,
                                   std::span<const double> series, const SplitScheme& split,
                                   std::size_t draws_h, std::uint64_t seed, BandwidthBase base) {
    benchmark.validate();
    if (benchmark.k() != 2) throw ValidationError("simulated critical values need K = 2");
    const SampleWindow oos = SampleWindow::out_of_sample(series, split);
    const SampleWindow ins = SampleWindow::in_sample(series, split);
    if (oos.size() < 2) throw ValidationError("simulated critical value needs P >= 2");

    SimulatedCvModel m;
    const HessianBlocks hb = hessian_blocks(loss, benchmark, oos);
    m.m_etaeta = hb.m_etaeta;
    m.m_etagamma = hb.m_etagamma;
    if (!(m.m_etaeta(0, 0) > 0.0))
        throw RankDeficiencyError("M_etaeta is singular; simulated critical value not computable");

    const Eigen::MatrixXd g = per_period_gradients(loss, benchmark, oos);
    const Eigen::VectorXd g_eta = g.col(0);
    m.sigma_x = Eigen::MatrixXd::Constant(
        1, 1,
        hac_lrv(std::span<const double>(g_eta.data(), static_cast<std::size_t>(g_eta.size())),
                bandwidth_for(split.p, split.total(), base))
            .value);

    const ConstituentScores cs = constituent_scores(loss, benchmark.gamma, ins);
    const Eigen::MatrixXd s_mid = hac_lrv_matrix(cs.s, bandwidth_for(split.r, split.total(), base));
    const Eigen::Matrix2d h_inv = cs.hess.cwiseInverse().asDiagonal();
    m.sigma_z = h_inv * s_mid * h_inv;
    m.sigma_z = 0.5 * (m.sigma_z + m.sigma_z.transpose());

    m.ratio_p_over_r = static_cast<double>(split.p) / static_cast<double>(split.r);
    m.draws_h = draws_h;
    m.seed = seed;
    m.validate();
    return m;
}

double simulated_critical_value(const SimulatedCvModel& model, double alpha) {
    model.validate();
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    const Eigen::Index kx = model.sigma_x.rows();
    const Eigen::Index kz = model.sigma_z.rows();
    const Eigen::MatrixXd lx = psd_factor(model.sigma_x);
    const Eigen::MatrixXd lz = psd_factor(model.sigma_z);
    const Eigen::MatrixXd m_inv = model.m_etaeta.inverse();
    const Eigen::MatrixXd cross = std::sqrt(model.ratio_p_over_r) * model.m_etagamma;

    const std::size_t h_total = model.draws_h;
    std::vector<double> stats(h_total);
    Eigen::VectorXd ex(kx), ez(kz);
    for (std::size_t block = 0; block * kDrawBlock < h_total; ++block) {
        NormalStream rng(derive_seed(model.seed, {block}));
        const std::size_t end = std::min(h_total, (block + 1) * kDrawBlock);
        for (std::size_t h = block * kDrawBlock; h < end; ++h) {
            for (Eigen::Index i = 0; i < kx; ++i) ex(i) = rng.next();
            for (Eigen::Index i = 0; i < kz; ++i) ez(i) = rng.next();
            const Eigen::VectorXd v = lx * ex + cross * (lz * ez);
            stats[h] = 0.5 * v.dot(m_inv * v);
        }
    }
    const auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(h_total) - 1e-9));
    const std::size_t idx = std::clamp<std::size_t>(rank, 1, h_total) - 1;
    std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(idx), stats.end());
    return stats[idx];
}

TestOutcome simulated_cv_test(const LossSeries& bench, const LossSeries& alt,
                              const SimulatedCvModel& model, double alpha) {
    check_pair(bench, alt);
    const double ratio =
        static_cast<double>(bench.split.p) / static_cast<double>(bench.split.r);
    if (std::abs(ratio - model.ratio_p_over_r) > 1e-12 * std::max(1.0, ratio))
        throw ValidationError("critical-value model was built for a different split");

    TestOutcome out;
    out.cv_method = CvMethod::SimulatedTwoStep;
    out.alpha = alpha;
    out.delta_p = average_loss_difference(bench, alt);
    const std::vector<double> d = differences(bench, alt);
    if (d.size() >= 2) {
        const LrvEstimate lrv = hac_lrv(d, std::sqrt(static_cast<double>(d.size())));
        out.omega_hat = lrv.value;
        out.omega_floored = lrv.floored;
    }
    out.d_p = static_cast<double>(bench.losses.size()) * out.delta_p;
    out.critical_value = simulated_critical_value(model, alpha);
    out.reject = out.d_p > out.critical_value;
    return out;
}

EtaStandardError two_step_eta_se(std::span<const double> series, const SplitScheme& split,
                                 Loss loss) {
    const SampleWindow w = SampleWindow::in_sample(series, split);
    const FitResult fit = fit_two_step(loss, w);
    const PoolParams& th = fit.theta;
    const double n = static_cast<double>(w.size());

    const ConstituentScores cs = constituent_scores(loss, th.gamma, w);
    const Eigen::MatrixXd g = per_period_gradients(loss, th, w);
    const HessianBlocks hb = hessian_blocks(loss, th, w);

    Eigen::MatrixXd scores(g.rows(), 3);
    scores.leftCols(2) = cs.s;
    scores.col(2) = g.col(0);

    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    a(0, 0) = cs.hess(0);
    a(1, 1) = cs.hess(1);
    a(2, 0) = hb.m_etagamma(0, 0);
    a(2, 1) = hb.m_etagamma(0, 1);
    a(2, 2) = hb.m_etaeta(0, 0);
    if (!(a(2, 2) > 0.0) || !(a(0, 0) > 0.0) || !(a(1, 1) > 0.0))
        throw DegenerateDataError("two-step Jacobian is singular");

    const Eigen::Matrix3d b = hac_lrv_matrix(scores, std::sqrt(static_cast<double>(split.r)));
    const Eigen::Matrix3d a_inv = a.inverse();
    const Eigen::Matrix3d v = a_inv * b * a_inv.transpose();
    const double se = std::sqrt(std::max(v(2, 2), 0.0) / n);
    if (!(se > 0.0) || !std::isfinite(se))
        throw DegenerateDataError("two-step standard error is zero or undefined");
    return {th.eta[0], se};
}

TestOutcome two_step_eta_ttest(std::span<const double> series, const SplitScheme& split,
                               Loss loss, double eta0, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    if (!(eta0 >= 0.0 && eta0 <= 1.0)) throw ValidationError("eta0 must be in [0, 1]");
    const EtaStandardError es = two_step_eta_se(series, split, loss);
    const double n = static_cast<double>(split.r - 2);
    TestOutcome out;
    out.cv_method = CvMethod::TwoSidedNormal;
    out.alpha = alpha;
    out.delta_p = es.eta - eta0;
    out.omega_hat = n * es.se * es.se;
    out.d_p = out.delta_p / es.se;
    out.critical_value = normal_quantile(1.0 - alpha / 2.0);
    out.p_value = 2.0 * (1.0 - normal_cdf(std::abs(out.d_p)));
    out.reject = std::abs(out.d_p) > out.critical_value;
    return out;
}

}  // namespace fcomb
