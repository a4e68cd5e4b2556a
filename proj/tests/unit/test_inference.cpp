#include <doctest.h>

#include <cmath>
#include <vector>

#include "fcomb/errors.hpp"
#include "fcomb/estimation.hpp"
#include "fcomb/inference.hpp"
#include "fcomb/rng.hpp"
#include "fcomb/timeseries.hpp"

using namespace fcomb;

namespace {

double naive_hac(const std::vector<double>& d, double bw) {
    const std::size_t n = d.size();
    double mean = 0;
    for (double v : d) mean += v;
    mean /= n;
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double c = 0;
        for (std::size_t t = j; t < n; ++t) c += (d[t] - mean) * (d[t - j] - mean);
        c /= n;
        s += (j == 0 ? 1.0 : 2.0 * qs_kernel(j / bw)) * c;
    }
    return s;
}

LossSeries series_of(std::vector<double> v, SplitScheme split) { return {std::move(v), split}; }

}  // namespace

TEST_SUITE("inference") {
    TEST_CASE("quadratic-spectral kernel") {
        CHECK(qs_kernel(0.0) == 1.0);
        CHECK(qs_kernel(1e-6) == doctest::Approx(1.0).epsilon(1e-9));
        // derived: closed form evaluated in double precision
        CHECK(qs_kernel(1.0) == doctest::Approx(0.13786058167459359).epsilon(1e-12));
        CHECK(qs_kernel(0.5) == doctest::Approx(0.6869307300640595).epsilon(1e-12));
        CHECK(qs_kernel(-2.5) == doctest::Approx(0.03377372788077926).epsilon(1e-12));
    }

    TEST_CASE("HAC of a constant series is zero") {
        const std::vector<double> c(500, 3.25);
        const LrvEstimate e = hac_lrv(c, std::sqrt(500.0));
        CHECK(e.value == 0.0);
        CHECK_FALSE(e.floored);
        const std::vector<double> z(100, 0.0);
        CHECK(hac_lrv(z, 10.0).value == 0.0);
    }

    TEST_CASE("HAC agrees with a direct summation on both code paths") {
        NormalStream rng(4);
        for (std::size_t n : {300u, 9000u}) {
            std::vector<double> d(n);
            double prev = 0;
            for (double& v : d) v = prev = 0.5 * prev + rng.next();
            const double bw = std::sqrt(static_cast<double>(n));
            CHECK(hac_lrv(d, bw).value == doctest::Approx(naive_hac(d, bw)).epsilon(1e-9));
        }
    }

    TEST_CASE("HAC of white noise is near its variance") {
        NormalStream rng(5);
        std::vector<double> d(100000);
        for (double& v : d) v = rng.next();
        CHECK(hac_lrv(d, std::sqrt(1e5)).value == doctest::Approx(1.0).epsilon(0.03));
    }

    TEST_CASE("matrix HAC diagonal matches the scalar estimator") {
        NormalStream rng(6);
        Eigen::MatrixXd x(400, 2);
        for (Eigen::Index i = 0; i < 400; ++i) {
            x(i, 0) = rng.next();
            x(i, 1) = 0.5 * x(i, 0) + rng.next();
        }
        const Eigen::MatrixXd m = hac_lrv_matrix(x, 20.0);
        for (int j = 0; j < 2; ++j) {
            std::vector<double> col(x.col(j).data(), x.col(j).data() + 400);
            CHECK(m(j, j) == doctest::Approx(naive_hac(col, 20.0)).epsilon(1e-10));
        }
        CHECK(m(0, 1) == m(1, 0));
    }

    TEST_CASE("standard test arithmetic") {
        const SplitScheme split{10, 6};
        const auto bench = series_of({1.0, 2.0, 1.5, 3.0, 2.5, 2.0}, split);
        const auto alt = series_of({0.5, 1.0, 1.5, 1.0, 2.0, 1.0}, split);
        const TestOutcome o = standard_test(bench, alt, 0.05);
        const std::vector<double> d = {0.5, 1.0, 0.0, 2.0, 0.5, 1.0};
        const double omega = naive_hac(d, std::sqrt(6.0));
        CHECK(o.delta_p == doctest::Approx(5.0 / 6.0));
        CHECK(o.omega_hat == doctest::Approx(omega));
        CHECK(o.d_p == doctest::Approx(std::sqrt(6.0) * (5.0 / 6.0) / std::sqrt(omega)));
        CHECK(o.critical_value == doctest::Approx(1.6448536269514722));
        CHECK(o.reject == (o.d_p > o.critical_value));
        CHECK(o.cv_method == CvMethod::StandardNormal);
        REQUIRE(o.p_value);
        CHECK(*o.p_value == doctest::Approx(0.5 * std::erfc(o.d_p / std::sqrt(2.0))));

        const TestOutcome zero = standard_test(bench, bench, 0.05);
        CHECK(zero.d_p == 0.0);
        CHECK_FALSE(zero.reject);

        CHECK_THROWS_AS(standard_test(bench, series_of({1, 2}, split), 0.05), ValidationError);
        CHECK_THROWS_AS(standard_test(bench, series_of(alt.losses, {12, 6}), 0.05), ValidationError);
        CHECK_THROWS_AS(standard_test(series_of({1}, {3, 1}), series_of({2}, {3, 1}), 0.05),
                        ValidationError);
        CHECK_THROWS_AS(standard_test(bench, alt, 1.5), ValidationError);
    }

    TEST_CASE("simulated critical value matches the chi-square limit") {
        SimulatedCvModel m;
        m.m_etaeta = Eigen::MatrixXd::Constant(1, 1, 2.0);
        m.m_etagamma = Eigen::MatrixXd::Zero(1, 2);
        m.sigma_x = Eigen::MatrixXd::Constant(1, 1, 3.0);
        m.sigma_z = Eigen::MatrixXd::Identity(2, 2);
        m.ratio_p_over_r = 1.0;
        m.draws_h = 200000;
        m.seed = 77;
        const double chi95 = 3.841458820694124;
        CHECK(simulated_critical_value(m, 0.05) == doctest::Approx(0.5 * 3.0 * chi95 / 2.0).epsilon(0.02));

        // the gamma channel adds (P/R) M_etagamma Sigma_Z M_etagamma' to the variance
        m.m_etagamma << 1.0, -0.5;
        m.sigma_z << 1.0, 0.3, 0.3, 2.0;
        m.ratio_p_over_r = 0.5;
        const double var = 3.0 + 0.5 * (1.0 - 0.3 + 0.5);
        CHECK(simulated_critical_value(m, 0.05) == doctest::Approx(0.5 * var * chi95 / 2.0).epsilon(0.02));

        m.draws_h = 10000;
        CHECK(simulated_critical_value(m, 0.05) == simulated_critical_value(m, 0.05));
        SimulatedCvModel other = m;
        other.seed = 78;
        CHECK(simulated_critical_value(m, 0.05) != simulated_critical_value(other, 0.05));
        other.draws_h = 10;
        CHECK_THROWS_AS(simulated_critical_value(other, 0.05), ValidationError);
    }

    TEST_CASE("estimated Sigma_Z equals the textbook OLS sandwich") {
        const auto y = simulate_ar2({0.4, -0.4, 1.0}, 1000, kDefaultBurnIn, 12).values;
        const SplitScheme split{500, 500};
        const SampleWindow ins = SampleWindow::in_sample(y, split);
        const auto gamma = fit_constituents(Loss::Msfe, ins);
        const PoolParams bench = make_fixed({0.5}, gamma);
        const SimulatedCvModel m = estimate_cv_model(Loss::Msfe, bench, y, split, 1000, 1);

        // n^{-1} sum x^2 per lag, HAC of x e per lag, combined by hand
        const double bw = std::sqrt(500.0);
        std::vector<double> s1, s2;
        double h1 = 0, h2 = 0;
        for (std::size_t t = ins.first; t < ins.last; ++t) {
            s1.push_back(y[t - 1] * (gamma[0] * y[t - 1] - y[t]));
            s2.push_back(y[t - 2] * (gamma[1] * y[t - 2] - y[t]));
            h1 += y[t - 1] * y[t - 1];
            h2 += y[t - 2] * y[t - 2];
        }
        h1 /= s1.size();
        h2 /= s2.size();
        CHECK(m.sigma_z(0, 0) == doctest::Approx(naive_hac(s1, bw) / (h1 * h1)).epsilon(1e-9));
        CHECK(m.sigma_z(1, 1) == doctest::Approx(naive_hac(s2, bw) / (h2 * h2)).epsilon(1e-9));
        CHECK(m.ratio_p_over_r == 1.0);
        CHECK(m.m_etaeta(0, 0) > 0.0);

        const auto lb = out_of_sample_losses(Loss::Msfe, bench, y, split);
        const auto la = out_of_sample_losses(Loss::Msfe, fit_two_step(Loss::Msfe, ins).theta, y, split);
        const TestOutcome o = simulated_cv_test(lb, la, m, 0.05);
        CHECK(o.d_p == doctest::Approx(500.0 * o.delta_p));
        CHECK(o.cv_method == CvMethod::SimulatedTwoStep);
        CHECK(o.critical_value > 0.0);
        const LossSeries wrong{la.losses, {400, 500}};
        CHECK_THROWS_AS(simulated_cv_test(LossSeries{lb.losses, {400, 500}}, wrong, m, 0.05), ValidationError);
    }

    TEST_CASE("t-test bookkeeping") {
        const auto y = simulate_ar2({0.4, -0.4, 1.0}, 2000, kDefaultBurnIn, 21).values;
        const SplitScheme split{1000, 1000};
        for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
            const EtaStandardError es = two_step_eta_se(y, split, loss);
            CHECK(es.se > 0.0);
            CHECK(es.se < 0.5);
            const TestOutcome t = two_step_eta_ttest(y, split, loss, 0.5, 0.05);
            CHECK(t.cv_method == CvMethod::TwoSidedNormal);
            CHECK(t.delta_p == doctest::Approx(es.eta - 0.5));
            CHECK(t.d_p == doctest::Approx((es.eta - 0.5) / es.se));
            CHECK(t.critical_value == doctest::Approx(1.959963984540054));
            CHECK(t.omega_hat == doctest::Approx(998.0 * es.se * es.se));
            CHECK(t.reject == (std::abs(t.d_p) > t.critical_value));
        }
        CHECK_THROWS_AS(two_step_eta_ttest(y, split, Loss::Msfe, 1.5, 0.05), ValidationError);
    }

    TEST_CASE("normal quantiles") {
        CHECK(normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-14));
        CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
        CHECK_THROWS_AS(normal_quantile(1.0), ValidationError);
        CHECK(to_string(CvMethod::TwoSidedNormal) == "two_sided_normal");
    }
}
