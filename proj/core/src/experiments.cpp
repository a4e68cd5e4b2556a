#include "fcomb/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fcomb/errors.hpp"
#include "fcomb/rng.hpp"

namespace fcomb {

namespace {

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

enum class Outcome : unsigned char { Failed, Accept, Reject };

struct RepResult {
    Outcome outcome = Outcome::Failed;
    bool positive_delta = false;
};

RepResult run_replication(const McConfig& cfg, std::span<const double> y, std::uint64_t seed) {
    const SplitScheme split = SplitScheme::halves(y.size());
    RepResult res;
    try {
        if (cfg.method == TestMethod::EtaTTest) {
            const TestOutcome t =
                two_step_eta_ttest(y, split, cfg.loss, cfg.benchmark.eta.at(0), cfg.alpha);
            res.outcome = t.reject ? Outcome::Reject : Outcome::Accept;
            res.positive_delta = t.delta_p > 0.0;
            return res;
        }
        const SampleWindow ins = SampleWindow::in_sample(y, split);
        const FitResult bench = fit_method(cfg.benchmark, cfg.loss, ins);
        const FitResult alt = fit_method(cfg.alternative, cfg.loss, ins);
        const LossSeries lb = out_of_sample_losses(cfg.loss, bench.theta, y, split);
        const LossSeries la = out_of_sample_losses(cfg.loss, alt.theta, y, split);
        TestOutcome t;
        if (cfg.method == TestMethod::StandardNormal) {
            t = standard_test(lb, la, cfg.alpha, cfg.bandwidth);
        } else {
            const SimulatedCvModel m = estimate_cv_model(cfg.loss, bench.theta, y, split,
                                                         cfg.draws_h, derive_seed(seed, {1}),
                                                         cfg.bandwidth);
            t = simulated_cv_test(lb, la, m, cfg.alpha);
        }
        res.outcome = t.reject ? Outcome::Reject : Outcome::Accept;
        res.positive_delta = t.delta_p > 0.0;
    } catch (const DegenerateDataError&) {
    } catch (const RankDeficiencyError&) {
    }
    return res;
}

void check_failures(std::size_t failures, std::size_t reps, std::size_t total) {
    if (static_cast<double>(failures) > kMaxFailureShare * static_cast<double>(reps))
        throw std::runtime_error(std::to_string(failures) + " of " + std::to_string(reps) +
                                 " replications failed at T+1 = " + std::to_string(total) +
                                 " (limit 1%)");
}

}  // namespace

std::string_view to_string(TestMethod method) {
    switch (method) {
        case TestMethod::StandardNormal: return "standard";
        case TestMethod::SimulatedTwoStep: return "simulated";
        case TestMethod::EtaTTest: return "ttest";
    }
    return "";
}

TestMethod parse_test_method(std::string_view text) {
    if (text == "standard") return TestMethod::StandardNormal;
    if (text == "simulated") return TestMethod::SimulatedTwoStep;
    if (text == "ttest") return TestMethod::EtaTTest;
    throw ValidationError("unknown critical-value method '" + std::string(text) +
                          "' (standard, simulated, ttest)");
}

unsigned resolve_threads(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FCOMB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void McConfig::validate() const {
    dgp.validate();
    benchmark.validate();
    alternative.validate();
    if (reps < 1) throw ValidationError("reps must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    if (sample_sizes.empty()) throw ValidationError("no sample sizes given");
    for (std::size_t n : sample_sizes) SplitScheme::halves(n);
    if (method == TestMethod::SimulatedTwoStep || method == TestMethod::EtaTTest) {
        if (benchmark.kind != EstimationMethod::Kind::TwoStepFixed)
            throw ValidationError("this method needs a fixed-weight benchmark");
    }
    if (method == TestMethod::SimulatedTwoStep &&
        alternative.kind != EstimationMethod::Kind::TwoStepOptimal)
        throw ValidationError("the simulated critical value applies to a two-step alternative");
    if (method == TestMethod::SimulatedTwoStep && draws_h < 1000)
        throw ValidationError("draws_h must be at least 1000");
}

std::uint64_t replication_seed(std::uint64_t base, std::size_t rep, std::size_t t_index,
                               bool reuse_truncated) {
    return reuse_truncated ? derive_seed(base, {rep}) : derive_seed(base, {rep, t_index});
}

RejectionCurve run_rejection_curve(const McConfig& cfg) {
    cfg.validate();
    const std::size_t nt = cfg.sample_sizes.size();
    const std::size_t max_total = *std::max_element(cfg.sample_sizes.begin(), cfg.sample_sizes.end());
    std::vector<RepResult> results(nt * cfg.reps);

    parallel_for(cfg.reps, resolve_threads(cfg.threads), [&](std::size_t rep) {
        SeriesSample long_path;
        if (cfg.reuse_truncated)
            long_path = simulate_ar2(cfg.dgp, max_total, cfg.burn_in,
                                     replication_seed(cfg.base_seed, rep, 0, true));
        for (std::size_t ti = 0; ti < nt; ++ti) {
            const std::size_t total = cfg.sample_sizes[ti];
            const std::uint64_t seed = replication_seed(cfg.base_seed, rep, ti, cfg.reuse_truncated);
            SeriesSample s = cfg.reuse_truncated ? SeriesSample{} : simulate_ar2(cfg.dgp, total, cfg.burn_in, seed);
            std::span<const double> y = cfg.reuse_truncated
                                            ? std::span<const double>(long_path.values).first(total)
                                            : std::span<const double>(s.values);
            results[ti * cfg.reps + rep] =
                run_replication(cfg, y, cfg.reuse_truncated ? derive_seed(seed, {ti}) : seed);
        }
    });

    RejectionCurve curve;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        CurvePoint pt;
        pt.total = cfg.sample_sizes[ti];
        for (std::size_t rep = 0; rep < cfg.reps; ++rep) {
            const RepResult& r = results[ti * cfg.reps + rep];
            if (r.outcome == Outcome::Failed) {
                ++pt.failures;
                continue;
            }
            ++pt.reps;
            if (r.outcome == Outcome::Reject) ++pt.rejections;
            if (r.positive_delta) ++pt.positive_delta;
        }
        check_failures(pt.failures, cfg.reps, pt.total);
        pt.frequency = static_cast<double>(pt.rejections) / static_cast<double>(pt.reps);
        std::tie(pt.ci_lo, pt.ci_hi) = bernoulli_ci(pt.rejections, pt.reps, 0.95);
        curve.points.push_back(pt);
    }
    return curve;
}

SizePowerConfig SizePowerConfig::reference_defaults(Loss loss) {
    SizePowerConfig c;
    c.loss = loss;
    if (loss == Loss::Msfe) {
        c.null_dgp = {0.4, -0.407, 1.0};
        c.power_dgp = {0.4, -0.45, 1.0};
    } else {
        c.null_dgp = {0.4, -0.4421, 1.0};
        c.power_dgp = {0.4, -0.5, 1.0};
    }
    return c;
}

void SizePowerConfig::validate() const {
    null_dgp.validate();
    power_dgp.validate();
    if (reps < 1) throw ValidationError("reps must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
    if (!(benchmark_eta >= 0.0 && benchmark_eta <= 1.0))
        throw ValidationError("benchmark weight must be in [0, 1]");
    if (sample_sizes.empty()) throw ValidationError("no sample sizes given");
    for (std::size_t n : sample_sizes) SplitScheme::halves(n);
    if (draws_h < 1000) throw ValidationError("draws_h must be at least 1000");
}

std::vector<SizePowerRow> run_size_power(const SizePowerConfig& cfg) {
    cfg.validate();
    struct Triple {
        bool ok = false;
        bool two_step = false, t_test = false, standard = false;
    };
    std::vector<SizePowerRow> rows;
    const Ar2Dgp dgps[2] = {cfg.null_dgp, cfg.power_dgp};
    const char* panels[2] = {"size", "power"};
    for (std::size_t panel = 0; panel < 2; ++panel) {
        for (std::size_t ti = 0; ti < cfg.sample_sizes.size(); ++ti) {
            const std::size_t total = cfg.sample_sizes[ti];
            std::vector<Triple> res(cfg.reps);
            parallel_for(cfg.reps, resolve_threads(cfg.threads), [&](std::size_t rep) {
                const std::uint64_t seed = derive_seed(cfg.base_seed, {panel, ti, rep});
                const SeriesSample s = simulate_ar2(dgps[panel], total, kDefaultBurnIn, seed);
                const SplitScheme split = SplitScheme::halves(total);
                Triple t;
                try {
                    const SampleWindow ins = SampleWindow::in_sample(s.values, split);
                    const FitResult alt = fit_two_step(cfg.loss, ins);
                    const PoolParams bench =
                        make_fixed({cfg.benchmark_eta}, alt.theta.gamma);
                    const LossSeries lb = out_of_sample_losses(cfg.loss, bench, s.values, split);
                    const LossSeries la = out_of_sample_losses(cfg.loss, alt.theta, s.values, split);
                    t.standard = standard_test(lb, la, cfg.alpha, cfg.bandwidth).reject;
                    const SimulatedCvModel m = estimate_cv_model(
                        cfg.loss, bench, s.values, split, cfg.draws_h, derive_seed(seed, {1}),
                        cfg.bandwidth);
                    t.two_step = simulated_cv_test(lb, la, m, cfg.alpha).reject;
                    t.t_test = two_step_eta_ttest(s.values, split, cfg.loss, cfg.benchmark_eta,
                                                  cfg.alpha)
                                   .reject;
                    t.ok = true;
                } catch (const DegenerateDataError&) {
                } catch (const RankDeficiencyError&) {
                }
                res[rep] = t;
            });
            SizePowerRow row;
            row.panel = panels[panel];
            row.total = total;
            std::size_t a = 0, b = 0, c = 0;
            for (const Triple& t : res) {
                if (!t.ok) {
                    ++row.failures;
                    continue;
                }
                ++row.reps;
                a += t.two_step;
                b += t.t_test;
                c += t.standard;
            }
            check_failures(row.failures, cfg.reps, total);
            const double n = static_cast<double>(row.reps);
            row.two_step = static_cast<double>(a) / n;
            row.t_test = static_cast<double>(b) / n;
            row.standard = static_cast<double>(c) / n;
            rows.push_back(row);
        }
    }
    return rows;
}

std::pair<double, double> bernoulli_ci(std::size_t successes, std::size_t trials, double level) {
    if (trials < 1) throw ValidationError("trials must be at least 1");
    if (successes > trials) throw ValidationError("successes exceed trials");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must be in (0, 1)");
    const double p = static_cast<double>(successes) / static_cast<double>(trials);
    const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
    const double half = z * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

}  // namespace fcomb
