// Acceptance run: one PASS/FAIL line per criterion.
// Usage: fcomb_acceptance [criterion...]   (default: all eight)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "fcomb/fcomb.hpp"
#include "fcomb/serialize.hpp"

using namespace fcomb;

namespace {

constexpr double kAlpha = 0.05;

// criterion 1
constexpr double kC1MaxStandardSize = 0.01;
// criterion 2
constexpr double kC2MsfeLo = 0.00, kC2MsfeHi = 0.05;
constexpr double kC2LogLo = 0.02, kC2LogHi = 0.09;
// criterion 3
constexpr double kC3MsfePower = 0.30, kC3MsfeTol = 0.06;
constexpr double kC3LogPower = 0.37, kC3LogTol = 0.07;
constexpr double kC3MsfeStandardMax = 0.03, kC3LogStandardMax = 0.01;
// criterion 4
constexpr double kC4At1000 = 0.17, kC4Tol1000 = 0.05;
constexpr double kC4At5000 = 0.55, kC4Tol5000 = 0.07;
// criterion 5
constexpr double kC5MinRejection = 0.90, kC5MinPositive = 0.95;
// criterion 6
constexpr double kC6MaxRejection = 0.5;
// criterion 7
constexpr double kC7EtaTol = 0.01, kC7MinimizerTol = 0.02;
constexpr std::size_t kC7Draws = 10'000'000;
// criterion 8
constexpr double kC8MaxSeconds = 60.0;

const std::vector<DgpSolution>& catalog() {
    static const std::vector<DgpSolution> cat = catalog_from_json(read_text_file(FCOMB_TEST_CATALOG));
    return cat;
}

Ar2Dgp catalog_dgp(Loss loss, double target) { return catalog_lookup(catalog(), loss, target).dgp; }

McConfig base_config(const Ar2Dgp& dgp, Loss loss, std::uint64_t seed) {
    McConfig c;
    c.dgp = dgp;
    c.loss = loss;
    c.alpha = kAlpha;
    c.base_seed = seed;
    return c;
}

CurvePoint single_point(McConfig c) { return run_rejection_curve(c).points.at(0); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

bool within(double x, double centre, double tol) { return std::abs(x - centre) <= tol; }

struct Verdict {
    bool pass;
    std::string detail;
};

Verdict criterion1() {
    std::string d;
    bool ok = true;
    for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
        McConfig c = base_config(catalog_dgp(loss, 0.5), loss, 101);
        c.method = TestMethod::StandardNormal;
        c.sample_sizes = {1000};
        c.reps = 500;
        const CurvePoint p = single_point(c);
        ok = ok && p.frequency <= kC1MaxStandardSize;
        d += std::string(to_string(loss)) + " standard size " + fmt("%.3f", p.frequency) + " (<= 0.01); ";
    }
    return {ok, d};
}

Verdict criterion2() {
    std::string d;
    bool ok = true;
    for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
        McConfig c = base_config(catalog_dgp(loss, 0.5), loss, 101);
        c.method = TestMethod::SimulatedTwoStep;
        c.sample_sizes = {1000};
        c.reps = 500;
        c.draws_h = 10000;
        const CurvePoint p = single_point(c);
        const double lo = loss == Loss::Msfe ? kC2MsfeLo : kC2LogLo;
        const double hi = loss == Loss::Msfe ? kC2MsfeHi : kC2LogHi;
        ok = ok && p.frequency >= lo && p.frequency <= hi;
        d += std::string(to_string(loss)) + " simulated size " + fmt("%.3f", p.frequency) + " in [" +
             fmt("%.2f", lo) + ", " + fmt("%.2f", hi) + "]; ";
    }
    return {ok, d};
}

Verdict criterion3() {
    std::string d;
    bool ok = true;
    for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
        const SizePowerConfig ref = SizePowerConfig::reference_defaults(loss);
        McConfig c = base_config(ref.power_dgp, loss, 303);
        c.sample_sizes = {2000};
        c.reps = 500;
        c.method = TestMethod::SimulatedTwoStep;
        const double sim = single_point(c).frequency;
        c.method = TestMethod::StandardNormal;
        const double std_power = single_point(c).frequency;
        const bool msfe = loss == Loss::Msfe;
        const double target = msfe ? kC3MsfePower : kC3LogPower;
        const double tol = msfe ? kC3MsfeTol : kC3LogTol;
        const double cap = msfe ? kC3MsfeStandardMax : kC3LogStandardMax;
        ok = ok && within(sim, target, tol) && std_power <= cap;
        d += std::string(to_string(loss)) + " simulated power " + fmt("%.3f", sim) + " (" +
             fmt("%.2f", target) + " +- " + fmt("%.2f", tol) + "), standard " + fmt("%.3f", std_power) +
             " (<= " + fmt("%.2f", cap) + "); ";
    }
    return {ok, d};
}

Verdict criterion4() {
    const SizePowerConfig ref = SizePowerConfig::reference_defaults(Loss::LogScore);
    McConfig c = base_config(ref.null_dgp, Loss::LogScore, 404);
    c.method = TestMethod::EtaTTest;
    c.benchmark = EstimationMethod::fixed(0.5);
    c.sample_sizes = {1000, 5000};
    c.reps = 500;
    const RejectionCurve r = run_rejection_curve(c);
    const double a = r.points[0].frequency, b = r.points[1].frequency;
    const bool ok = within(a, kC4At1000, kC4Tol1000) && within(b, kC4At5000, kC4Tol5000);
    return {ok, "log t-test T=1000 " + fmt("%.3f", a) + " (0.17 +- 0.05), T=5000 " + fmt("%.3f", b) +
                    " (0.55 +- 0.07)"};
}

Verdict criterion5() {
    std::string d;
    bool ok = true;
    for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
        for (const EstimationMethod& bench : {EstimationMethod::two_step(), EstimationMethod::equal_weights()}) {
            McConfig c = base_config(catalog_dgp(loss, 0.25), loss, 505);
            c.method = TestMethod::StandardNormal;
            c.benchmark = bench;
            c.alternative = EstimationMethod::one_step();
            c.sample_sizes = {2000};
            c.reps = 200;
            const CurvePoint p = single_point(c);
            const double pos = static_cast<double>(p.positive_delta) / static_cast<double>(p.reps);
            ok = ok && p.frequency >= kC5MinRejection && pos >= kC5MinPositive;
            d += std::string(to_string(loss)) + " " + to_string(bench) + ": reject " +
                 fmt("%.3f", p.frequency) + " (>= 0.90), Delta>0 " + fmt("%.3f", pos) + " (>= 0.95); ";
        }
    }
    return {ok, d};
}

Verdict criterion6() {
    std::string d;
    bool ok = true;
    for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
        McConfig c = base_config(catalog_dgp(loss, 0.25), loss, 606);
        c.method = TestMethod::StandardNormal;
        c.sample_sizes = {100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
        c.reps = 500;
        double worst = 0.0;
        for (const CurvePoint& p : run_rejection_curve(c).points) worst = std::max(worst, p.frequency);
        ok = ok && worst < kC6MaxRejection;
        d += std::string(to_string(loss)) + " max rejection " + fmt("%.3f", worst) + " (< 0.5); ";
    }
    return {ok, d};
}

// Weight re-evaluated on a fresh path: closed form for MSFE, bisection on the
// average eta-derivative of the log score otherwise. gamma is held at (rho1, rho2).
double reevaluate_eta(const DgpSolution& s, std::uint64_t seed) {
    const std::vector<double> y = simulate_ar2(s.dgp, kC7Draws + 2, kDefaultBurnIn, seed).values;
    const Ar2Moments m = ar2_moments(s.dgp);
    const std::size_t n = y.size() - 2;
    if (s.loss == Loss::Msfe) {
        double saa = 0, sab = 0;
        for (std::size_t t = 2; t < y.size(); ++t) {
            const double a = m.rho1 * y[t - 1] - m.rho2 * y[t - 2];
            const double b = m.rho2 * y[t - 2] - y[t];
            saa += a * a;
            sab += a * b;
        }
        return std::clamp(-sab / saa, 0.0, 1.0);
    }
    // share of the first density, f1 / (f1 + f2)
    std::vector<double> w(n);
    for (std::size_t t = 2; t < y.size(); ++t) {
        const double u1 = y[t] - m.rho1 * y[t - 1], u2 = y[t] - m.rho2 * y[t - 2];
        w[t - 2] = 1.0 / (1.0 + std::exp(0.5 * (u1 * u1 - u2 * u2)));
    }
    const auto slope = [&](double eta) {
        double acc = 0;
        for (double wi : w) acc -= (2.0 * wi - 1.0) / (eta * wi + (1.0 - eta) * (1.0 - wi));
        return acc / static_cast<double>(n);
    };
    if (slope(0.0) >= 0.0) return 0.0;
    if (slope(1.0) <= 0.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Verdict criterion7() {
    std::string d;
    bool ok = true;
    double worst = 0.0;
    for (const DgpSolution& s : catalog()) {
        const double eta = reevaluate_eta(s, derive_seed(707, {static_cast<std::uint64_t>(s.loss),
                                                               static_cast<std::uint64_t>(s.target_eta_star * 100)}));
        worst = std::max(worst, std::abs(eta - s.target_eta_star));
    }
    ok = worst <= kC7EtaTol && catalog().size() == 10;
    const auto x = criterion_minimizer();
    const bool min_ok = std::abs(x[0] - 0.38) <= kC7MinimizerTol && std::abs(x[1] - 0.14) <= kC7MinimizerTol;
    d = std::to_string(catalog().size()) + " entries, max |eta - target| " + fmt("%.4f", worst) +
        " (<= 0.01); minimizer (" + fmt("%.4f", x[0]) + ", " + fmt("%.4f", x[1]) + ") vs (0.38, 0.14)";
    return {ok && min_ok, d};
}

Verdict criterion8() {
    const auto start = std::chrono::steady_clock::now();
    const std::string cmd = std::string("\"") + FCOMB_UNIT_TESTS + "\" --minimal > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {status == 0 && secs < kC8MaxSeconds,
            std::string("unit property suite ") + (status == 0 ? "passed" : "failed") + " in " +
                fmt("%.1f", secs) + " s (< 60 s)"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Verdict()>> criteria = {
        criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8};
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
    if (which.empty())
        for (int i = 1; i <= 8; ++i) which.push_back(i);

    int failures = 0;
    for (int k : which) {
        if (k < 1 || k > 8) {
            std::fprintf(stderr, "unknown criterion %d\n", k);
            return 2;
        }
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[static_cast<std::size_t>(k - 1)]();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %d: %s  %s[%.1f s]\n", k, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
