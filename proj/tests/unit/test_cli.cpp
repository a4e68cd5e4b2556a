#include <doctest.h>

#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "cli.hpp"
#include "fcomb/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = fcomb::cli::dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "fcomb_cli_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("exit codes") {
        CHECK(run({}).code == fcomb::cli::kExitValidation);
        CHECK(run({"--help"}).code == fcomb::cli::kExitOk);
        CHECK(run({"frobnicate"}).code == fcomb::cli::kExitValidation);
        CHECK(run({"simulate", "--phi1", "0.9", "--phi2", "0.2", "--n", "100"}).code ==
              fcomb::cli::kExitValidation);
        CHECK(run({"estimate", "--series", "/nonexistent.csv", "--loss", "msfe"}).code ==
              fcomb::cli::kExitValidation);
        CHECK(run({"find-dgp", "--loss", "msfe", "--eta-star", "2"}).code == fcomb::cli::kExitValidation);
        const Run bad_loss = run({"mc-curve", "--loss", "crps", "--phi1", "0.4", "--phi2", "-0.4"});
        CHECK(bad_loss.code == fcomb::cli::kExitValidation);
        CHECK_FALSE(bad_loss.err.empty());
    }

    TEST_CASE("simulate, estimate and test on a file") {
        TempDir tmp;
        const std::string series = tmp / "y.csv";
        REQUIRE(run({"simulate", "--phi1", "0.4", "--phi2", "-0.4", "--unit-variance", "--n", "600",
                     "--seed", "5", "--out", series})
                    .code == 0);
        std::ifstream in(series);
        const auto y = fcomb::read_series_csv(in);
        CHECK(y.size() == 600);
        const auto direct = fcomb::simulate_ar2(fcomb::unit_variance_dgp(0.4, -0.4), 600, fcomb::kDefaultBurnIn, 5);
        CHECK(y == direct.values);

        const Run est = run({"estimate", "--series", series, "--loss", "log", "--method", "two-step"});
        REQUIRE(est.code == 0);
        const json fit = json::parse(est.out);
        CHECK(fit["theta"]["weights"].size() == 2);
        CHECK(fit["converged"].get<bool>());

        const std::string losses = tmp / "losses.csv", model = tmp / "model.json";
        const Run t = run({"test", "--series", series, "--loss", "msfe", "--bench", "equal", "--alt",
                           "two-step", "--cv", "simulated", "--draws", "2000", "--losses-out", losses,
                           "--cv-model-out", model, "--seed", "9"});
        REQUIRE(t.code == 0);
        const json outcome = json::parse(t.out);
        CHECK(outcome["cv_method"] == "simulated_two_step");

        // the exported losses and model reproduce the decision
        const Run again = run({"test-losses", "--losses", losses, "--r", "300", "--cv", "simulated",
                               "--cv-model", model});
        REQUIRE(again.code == 0);
        const json o2 = json::parse(again.out);
        CHECK(o2["d_p"].get<double>() == outcome["d_p"].get<double>());
        CHECK(o2["critical_value"].get<double>() == outcome["critical_value"].get<double>());

        const Run std_run = run({"test-losses", "--losses", losses, "--cv", "standard"});
        CHECK(std_run.code == 0);
        CHECK(json::parse(std_run.out)["cv_method"] == "standard_normal");

        std::ofstream(tmp / "bad.csv") << "t,loss_benchmark,loss_alternative\n1,0.5,0.2\n2,x,0.1\n";
        const Run bad = run({"test-losses", "--losses", tmp / "bad.csv", "--cv", "standard"});
        CHECK(bad.code == fcomb::cli::kExitValidation);
        CHECK(bad.err.find(":3:") != std::string::npos);
    }

    TEST_CASE("Monte Carlo output is stable across thread counts") {
        const std::vector<std::string> base = {"mc-curve", "--phi1", "0.4", "--phi2", "-0.4",
                                               "--unit-variance", "--loss", "msfe", "--sizes",
                                               "200,300", "--reps", "20", "--seed", "3"};
        auto with = [&](const std::string& threads) {
            auto args = base;
            args.insert(args.end(), {"--threads", threads});
            return run(args);
        };
        const Run a = with("1"), b = with("2");
        REQUIRE(a.code == 0);
        CHECK(a.out == b.out);
        CHECK(a.out.rfind("T,frequency,ci_lo,ci_hi,reps\n200,", 0) == 0);
    }

    TEST_CASE("FCOMB_OUT_DIR receives default file names") {
        TempDir tmp;
        ::setenv("FCOMB_OUT_DIR", tmp.path.c_str(), 1);
        const Run r = run({"simulate", "--phi1", "0.3", "--phi2", "0.1", "--n", "50"});
        ::unsetenv("FCOMB_OUT_DIR");
        CHECK(r.code == 0);
        CHECK(r.out.empty());
        CHECK(fs::exists(tmp.path / "series.csv"));
    }
}
