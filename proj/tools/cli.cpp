#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "fcomb/fcomb.hpp"

namespace fcomb::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kFullScaleReps = 5000;

struct Output {
    std::string path;

    // Explicit --out wins; otherwise FCOMB_OUT_DIR/<fallback>; otherwise stdout.
    void emit(const std::string& content, const std::string& fallback, std::ostream& out) const {
        fs::path target;
        if (!path.empty()) {
            target = path;
        } else if (const char* dir = std::getenv("FCOMB_OUT_DIR"); dir && *dir) {
            target = fs::path(dir) / fallback;
        } else {
            out << content;
            return;
        }
        write_file_atomic(target, content);
    }

    bool wants_csv(bool default_csv) const {
        if (path.empty()) return default_csv;
        const std::string ext = fs::path(path).extension().string();
        if (ext == ".csv") return true;
        if (ext == ".json") return false;
        return default_csv;
    }
};

std::string catalog_path(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("FCOMB_CATALOG"); env && *env) return env;
    return FCOMB_DEFAULT_CATALOG;
}

std::vector<double> load_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    return read_series_csv(in, path);
}

std::vector<std::size_t> parse_sizes(const std::string& sizes, const std::string& grid) {
    std::vector<std::size_t> out;
    if (!grid.empty()) {
        // lo:hi:count, evenly spaced and rounded to even lengths
        std::istringstream ss(grid);
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c))
            throw ValidationError("--grid expects lo:hi:count");
        const double lo = std::stod(a), hi = std::stod(b);
        const long n = std::stol(c);
        if (n < 1 || lo < 6 || hi < lo) throw ValidationError("invalid --grid " + grid);
        for (long i = 0; i < n; ++i) {
            const double v = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
            auto t = static_cast<std::size_t>(std::llround(v / 2.0)) * 2;
            if (out.empty() || out.back() != t) out.push_back(t);
        }
        return out;
    }
    std::istringstream ss(sizes);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        const unsigned long v = std::stoul(item, &pos);
        if (pos != item.size()) throw ValidationError("bad sample size '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError("no sample sizes given");
    return out;
}

Ar2Dgp parse_dgp_triplet(const std::string& text) {
    std::istringstream ss(text);
    std::string a, b, c;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
        throw ValidationError("expected phi1,phi2,sigma2 in '" + text + "'");
    Ar2Dgp d{std::stod(a), std::stod(b), std::stod(c)};
    d.validate();
    return d;
}

struct DgpFlags {
    double phi1 = 0.0, phi2 = 0.0, sigma2 = 1.0;
    bool unit_variance = false;
    double eta_star = -1.0;
    std::string catalog;
    CLI::Option* phi1_opt = nullptr;

    void add(CLI::App* cmd, bool allow_target) {
        phi1_opt = cmd->add_option("--phi1", phi1, "AR(1) coefficient");
        cmd->add_option("--phi2", phi2, "AR(2) coefficient");
        cmd->add_option("--sigma2", sigma2, "innovation variance");
        cmd->add_flag("--unit-variance", unit_variance, "scale innovations so Var(y) = 1");
        if (allow_target) {
            cmd->add_option("--eta-star", eta_star, "catalog target weight");
            cmd->add_option("--catalog", catalog, "DGP catalog JSON");
        }
    }

    Ar2Dgp resolve(Loss loss) const {
        if (eta_star >= 0.0) {
            const auto cat = catalog_from_json(read_text_file(catalog_path(catalog)), catalog_path(catalog));
            return catalog_lookup(cat, loss, eta_star).dgp;
        }
        if (phi1_opt && phi1_opt->count() == 0 && phi1 == 0.0 && phi2 == 0.0)
            throw ValidationError("give --phi1/--phi2 or --eta-star");
        Ar2Dgp d = unit_variance ? unit_variance_dgp(phi1, phi2) : Ar2Dgp{phi1, phi2, sigma2};
        d.validate();
        return d;
    }
};

BandwidthBase parse_base(const std::string& s) {
    if (s == "P") return BandwidthBase::P;
    if (s == "T") return BandwidthBase::T;
    throw ValidationError("--bandwidth-base must be P or T");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Forecast-combination estimation and testing for a two-model linear pool", "fcomb"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    Output output;
    unsigned threads = 0;
    auto common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--out", output.path, "output file (.json or .csv); stdout if omitted");
    };

    // find-dgp
    auto* find = app.add_subcommand("find-dgp", "solve for an AR(2) with a given pseudo-true weight");
    std::string find_loss;
    double find_target = -1.0;
    std::size_t sim_n = kDefaultSimN;
    bool find_catalog = false;
    double find_tol = 1e-3;
    common(find);
    find->add_option("--loss", find_loss, "msfe or log");
    find->add_option("--eta-star", find_target, "target weight in [0, 1]");
    find->add_option("--sim-n", sim_n, "draws for simulated constraints");
    find->add_option("--tolerance", find_tol, "accepted |achieved - target|");
    find->add_flag("--catalog", find_catalog, "solve both losses at 0, .25, .5, .75, 1");

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate an AR(2) series");
    DgpFlags sim_dgp;
    std::size_t sim_len = 0, burn = kDefaultBurnIn;
    common(sim);
    sim_dgp.add(sim, false);
    sim->add_option("--n", sim_len, "series length T+1")->required();
    sim->add_option("--burn-in", burn, "discarded warm-up draws");

    // estimate
    auto* est = app.add_subcommand("estimate", "fit a combination on a series window");
    std::string est_series, est_loss, est_method = "two-step";
    std::size_t est_r = 0;
    common(est);
    est->add_option("--series", est_series, "CSV with header t,y")->required();
    est->add_option("--loss", est_loss, "msfe or log")->required();
    est->add_option("--method", est_method, "one-step, two-step, equal, fixed:<eta>");
    est->add_option("--r", est_r, "use the first R observations (default: all)");

    // test
    auto* tst = app.add_subcommand("test", "estimate on R, evaluate on P, and test");
    std::string t_series, t_loss, t_bench = "equal", t_alt = "two-step", t_cv = "standard",
                t_losses_out, t_model_out, t_base = "P";
    std::size_t t_r = 0, draws = 10000;
    double alpha = 0.05;
    common(tst);
    tst->add_option("--series", t_series, "CSV with header t,y")->required();
    tst->add_option("--loss", t_loss, "msfe or log")->required();
    tst->add_option("--r", t_r, "in-sample size (default: half)");
    tst->add_option("--bench", t_bench, "benchmark method");
    tst->add_option("--alt", t_alt, "alternative method");
    tst->add_option("--cv", t_cv, "standard, simulated or ttest");
    tst->add_option("--alpha", alpha, "test level");
    tst->add_option("--draws", draws, "simulated critical value draws H");
    tst->add_option("--bandwidth-base", t_base, "HAC bandwidth base: P or T");
    tst->add_option("--losses-out", t_losses_out, "write the out-of-sample loss CSV");
    tst->add_option("--cv-model-out", t_model_out, "write the critical-value model JSON");

    // test-losses
    auto* tl = app.add_subcommand("test-losses", "test externally produced loss series");
    std::string tl_losses, tl_bench, tl_alt, tl_cv = "standard", tl_model;
    std::size_t tl_r = 0;
    common(tl);
    tl->add_option("--losses", tl_losses, "CSV with header t,loss_benchmark,loss_alternative");
    tl->add_option("--bench", tl_bench, "CSV with header t,loss (benchmark)");
    tl->add_option("--alt", tl_alt, "CSV with header t,loss (alternative)");
    tl->add_option("--cv", tl_cv, "standard or simulated");
    tl->add_option("--r", tl_r, "in-sample size behind the losses");
    tl->add_option("--cv-model", tl_model, "critical-value model JSON (simulated)");
    tl->add_option("--alpha", alpha, "test level");

    // mc-curve
    auto* mc = app.add_subcommand("mc-curve", "Monte Carlo rejection-frequency curve");
    DgpFlags mc_dgp;
    std::string mc_loss, mc_bench = "equal", mc_alt = "two-step", mc_cv = "standard",
                mc_sizes = "200,400,600,800,1000", mc_grid, mc_svg, mc_base = "P";
    std::size_t reps = 500;
    bool truncate = false;
    bool full_scale = false;
    common(mc);
    mc_dgp.add(mc, true);
    mc->add_option("--loss", mc_loss, "msfe or log")->required();
    mc->add_option("--bench", mc_bench, "benchmark method");
    mc->add_option("--alt", mc_alt, "alternative method");
    mc->add_option("--cv", mc_cv, "standard, simulated or ttest");
    mc->add_option("--sizes", mc_sizes, "comma-separated T+1 values");
    mc->add_option("--grid", mc_grid, "lo:hi:count grid of T+1 values");
    auto* mc_reps = mc->add_option("--reps", reps, "replications per size");
    mc->add_flag("--full-scale", full_scale, "5000 replications per size")->excludes(mc_reps);
    mc->add_option("--alpha", alpha, "test level");
    mc->add_option("--draws", draws, "simulated critical value draws H");
    mc->add_option("--threads", threads, "worker threads (default: FCOMB_THREADS or all cores)");
    mc->add_option("--bandwidth-base", mc_base, "HAC bandwidth base: P or T");
    mc->add_flag("--truncate", truncate, "reuse nested truncations of one path per replication");
    mc->add_option("--svg", mc_svg, "write an SVG chart");

    // mc-table
    auto* tab = app.add_subcommand("mc-table", "Monte Carlo size/power table");
    std::string tab_loss, tab_sizes = "1000,2000,5000", tab_null, tab_power;
    std::size_t tab_reps = 1000;
    double tab_eta = 0.5;
    common(tab);
    tab->add_option("--loss", tab_loss, "msfe or log")->required();
    auto* tab_reps_opt = tab->add_option("--reps", tab_reps, "replications per cell");
    tab->add_flag("--full-scale", full_scale, "5000 replications per cell")->excludes(tab_reps_opt);
    tab->add_option("--sizes", tab_sizes, "comma-separated T values (series lengths)");
    tab->add_option("--null-dgp", tab_null, "phi1,phi2,sigma2 for the size panel");
    tab->add_option("--power-dgp", tab_power, "phi1,phi2,sigma2 for the power panel");
    tab->add_option("--benchmark-eta", tab_eta, "fixed benchmark weight");
    tab->add_option("--alpha", alpha, "test level");
    tab->add_option("--draws", draws, "simulated critical value draws H");
    tab->add_option("--threads", threads, "worker threads");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*find) {
            SolverOptions opt;
            opt.sim_n = sim_n;
            opt.tolerance = find_tol;
            if (find->get_option("--seed")->count()) opt.seed = seed;
            if (find_catalog) {
                std::vector<DgpSolution> cat;
                for (Loss loss : {Loss::Msfe, Loss::LogScore})
                    for (double target : {0.0, 0.25, 0.5, 0.75, 1.0})
                        cat.push_back(solve_for_eta_star(target, loss, opt));
                output.emit(to_json(cat) + "\n", "dgp_catalog.json", out);
            } else {
                if (find_loss.empty() || find_target < 0.0)
                    throw ValidationError("find-dgp needs --loss and --eta-star (or --catalog)");
                output.emit(to_json(solve_for_eta_star(find_target, parse_loss(find_loss), opt)) + "\n",
                            "dgp.json", out);
            }
        } else if (*sim) {
            const Ar2Dgp dgp = sim_dgp.resolve(Loss::Msfe);
            const SeriesSample s = simulate_ar2(dgp, sim_len, burn, seed);
            if (output.wants_csv(true)) {
                std::ostringstream ss;
                write_series_csv(ss, s.values);
                output.emit(ss.str(), "series.csv", out);
            } else {
                output.emit(to_json(s, dgp) + "\n", "series.json", out);
            }
        } else if (*est) {
            const std::vector<double> y = load_series(est_series);
            const std::size_t r = est_r == 0 ? y.size() : est_r;
            if (r > y.size() || r < 3) throw ValidationError("--r must be in [3, series length]");
            const SampleWindow w{y, 2, r};
            const FitResult fit = fit_method(parse_method(est_method), parse_loss(est_loss), w);
            output.emit(to_json(fit) + "\n", "fit.json", out);
        } else if (*tst) {
            const std::vector<double> y = load_series(t_series);
            const Loss loss = parse_loss(t_loss);
            const std::size_t r = t_r == 0 ? y.size() / 2 : t_r;
            if (r >= y.size()) throw ValidationError("--r leaves no out-of-sample observations");
            const SplitScheme split{r, y.size() - r};
            split.validate();
            const TestMethod method = parse_test_method(t_cv);
            const EstimationMethod bm = parse_method(t_bench);
            TestOutcome outcome;
            if (method == TestMethod::EtaTTest) {
                if (bm.kind != EstimationMethod::Kind::TwoStepFixed)
                    throw ValidationError("ttest needs a fixed benchmark weight (--bench fixed:<eta>)");
                outcome = two_step_eta_ttest(y, split, loss, bm.eta.at(0), alpha);
            } else {
                const SampleWindow ins = SampleWindow::in_sample(y, split);
                const FitResult fb = fit_method(bm, loss, ins);
                const FitResult fa = fit_method(parse_method(t_alt), loss, ins);
                const LossSeries lb = out_of_sample_losses(loss, fb.theta, y, split);
                const LossSeries la = out_of_sample_losses(loss, fa.theta, y, split);
                if (!t_losses_out.empty()) {
                    std::ostringstream ss;
                    write_loss_csv(ss, lb, la);
                    write_file_atomic(t_losses_out, ss.str());
                }
                if (method == TestMethod::StandardNormal) {
                    outcome = standard_test(lb, la, alpha, parse_base(t_base));
                } else {
                    if (bm.kind != EstimationMethod::Kind::TwoStepFixed)
                        throw ValidationError("simulated critical values need a fixed benchmark weight");
                    const SimulatedCvModel m =
                        estimate_cv_model(loss, fb.theta, y, split, draws, seed, parse_base(t_base));
                    if (!t_model_out.empty()) write_file_atomic(t_model_out, to_json(m) + "\n");
                    outcome = simulated_cv_test(lb, la, m, alpha);
                }
            }
            output.emit(to_json(outcome) + "\n", "test.json", out);
        } else if (*tl) {
            PairedLosses pl;
            if (!tl_losses.empty()) {
                if (!tl_bench.empty() || !tl_alt.empty())
                    throw ValidationError("use either --losses or --bench/--alt");
                pl = ingest_loss_csv(fs::path(tl_losses), tl_r);
            } else {
                if (tl_bench.empty() || tl_alt.empty())
                    throw ValidationError("test-losses needs --losses or both --bench and --alt");
                std::ifstream bi(tl_bench), ai(tl_alt);
                if (!bi) throw ValidationError("cannot open " + tl_bench);
                if (!ai) throw ValidationError("cannot open " + tl_alt);
                pl.bench.losses = read_single_loss_csv(bi, tl_bench);
                pl.alt.losses = read_single_loss_csv(ai, tl_alt);
                if (pl.bench.losses.size() != pl.alt.losses.size())
                    throw ValidationError("benchmark and alternative files differ in length");
                pl.bench.split = {tl_r, pl.bench.losses.size()};
                pl.alt.split = pl.bench.split;
            }
            TestOutcome outcome;
            if (tl_cv == "standard") {
                outcome = standard_test(pl.bench, pl.alt, alpha);
            } else if (tl_cv == "simulated") {
                if (tl_r == 0) throw ValidationError("--r is required for the simulated method");
                if (tl_model.empty()) throw ValidationError("--cv-model is required for the simulated method");
                SimulatedCvModel m = cv_model_from_json(read_text_file(tl_model), tl_model);
                if (tl->get_option("--seed")->count()) m.seed = seed;
                outcome = simulated_cv_test(pl.bench, pl.alt, m, alpha);
            } else {
                throw ValidationError("--cv must be standard or simulated for test-losses");
            }
            output.emit(to_json(outcome) + "\n", "test.json", out);
        } else if (*mc) {
            McConfig cfg;
            cfg.loss = parse_loss(mc_loss);
            cfg.dgp = mc_dgp.resolve(cfg.loss);
            cfg.benchmark = parse_method(mc_bench);
            cfg.alternative = parse_method(mc_alt);
            cfg.method = parse_test_method(mc_cv);
            cfg.sample_sizes = parse_sizes(mc_sizes, mc_grid);
            cfg.reps = full_scale ? kFullScaleReps : reps;
            cfg.alpha = alpha;
            cfg.base_seed = seed;
            cfg.draws_h = draws;
            cfg.reuse_truncated = truncate;
            cfg.bandwidth = parse_base(mc_base);
            cfg.threads = threads;
            const RejectionCurve curve = run_rejection_curve(cfg);
            if (!mc_svg.empty())
                write_file_atomic(mc_svg, curve_svg(curve, std::string(to_string(cfg.loss)) + ": " +
                                                               to_string(cfg.benchmark) + " vs " +
                                                               to_string(cfg.alternative)));
            if (output.wants_csv(true)) {
                std::ostringstream ss;
                write_curve_csv(ss, curve);
                output.emit(ss.str(), "curve.csv", out);
            } else {
                output.emit(to_json(curve, cfg) + "\n", "curve.json", out);
            }
        } else if (*tab) {
            SizePowerConfig cfg = SizePowerConfig::reference_defaults(parse_loss(tab_loss));
            if (!tab_null.empty()) cfg.null_dgp = parse_dgp_triplet(tab_null);
            if (!tab_power.empty()) cfg.power_dgp = parse_dgp_triplet(tab_power);
            cfg.sample_sizes = parse_sizes(tab_sizes, "");
            cfg.reps = full_scale ? kFullScaleReps : tab_reps;
            cfg.alpha = alpha;
            cfg.base_seed = seed;
            cfg.draws_h = draws;
            cfg.benchmark_eta = tab_eta;
            cfg.threads = threads;
            const auto table = run_size_power(cfg);
            if (output.wants_csv(true)) {
                std::ostringstream ss;
                write_size_power_csv(ss, table);
                output.emit(ss.str(), "table.csv", out);
            } else {
                output.emit(to_json(table, cfg) + "\n", "table.json", out);
            }
        }
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace fcomb::cli
