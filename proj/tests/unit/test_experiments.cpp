#include <doctest.h>

#include <cstdlib>

#include "fcomb/errors.hpp"
#include "fcomb/experiments.hpp"

using namespace fcomb;

namespace {

bool same(const RejectionCurve& a, const RejectionCurve& b) {
    if (a.points.size() != b.points.size()) return false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const CurvePoint &x = a.points[i], &y = b.points[i];
        if (x.total != y.total || x.rejections != y.rejections || x.reps != y.reps ||
            x.failures != y.failures || x.positive_delta != y.positive_delta || x.frequency != y.frequency)
            return false;
    }
    return true;
}

McConfig small(TestMethod method, Loss loss) {
    McConfig c;
    c.dgp = unit_variance_dgp(0.4, -0.4);
    c.loss = loss;
    c.method = method;
    c.sample_sizes = {200, 300};
    c.reps = 24;
    c.draws_h = 1000;
    c.base_seed = 2024;
    return c;
}

}  // namespace

TEST_SUITE("experiments") {
    TEST_CASE("Wald interval") {
        const auto [lo, hi] = bernoulli_ci(500, 1000, 0.95);
        CHECK(lo == doctest::Approx(0.5 - 0.030990).epsilon(1e-4));
        CHECK(hi == doctest::Approx(0.5 + 0.030990).epsilon(1e-4));
        const auto [z0, z1] = bernoulli_ci(0, 50, 0.95);
        CHECK(z0 == 0.0);
        CHECK(z1 == 0.0);
        CHECK(bernoulli_ci(1, 10, 0.95).first == 0.0);
        CHECK_THROWS_AS(bernoulli_ci(11, 10, 0.95), ValidationError);
    }

    TEST_CASE("replication seeds") {
        CHECK(replication_seed(1, 3, 0, true) == replication_seed(1, 3, 7, true));
        CHECK(replication_seed(1, 3, 0, false) != replication_seed(1, 3, 7, false));
        CHECK(replication_seed(1, 3, 0, false) != replication_seed(1, 4, 0, false));
    }

    TEST_CASE("rejection curves are bit-identical across thread counts") {
        for (TestMethod method : {TestMethod::StandardNormal, TestMethod::SimulatedTwoStep, TestMethod::EtaTTest}) {
            for (Loss loss : {Loss::Msfe, Loss::LogScore}) {
                CAPTURE(to_string(method));
                McConfig c = small(method, loss);
                c.threads = 1;
                const RejectionCurve one = run_rejection_curve(c);
                c.threads = 3;
                const RejectionCurve three = run_rejection_curve(c);
                CHECK(same(one, three));
                REQUIRE(one.points.size() == 2);
                CHECK(one.points[0].total == 200);
                CHECK(one.points[0].reps + one.points[0].failures == 24);
                const auto& p = one.points[1];
                CHECK(p.frequency == doctest::Approx(double(p.rejections) / p.reps));
                CHECK(p.ci_lo <= p.frequency);
                CHECK(p.ci_hi >= p.frequency);
            }
        }
    }

    TEST_CASE("truncated reuse draws one path per replication") {
        McConfig c = small(TestMethod::StandardNormal, Loss::Msfe);
        c.reuse_truncated = true;
        c.sample_sizes = {300, 300};
        const RejectionCurve r = run_rejection_curve(c);
        CHECK(r.points[0].rejections == r.points[1].rejections);
        CHECK(r.points[0].positive_delta == r.points[1].positive_delta);
    }

    TEST_CASE("size/power table is schedule independent") {
        SizePowerConfig c = SizePowerConfig::reference_defaults(Loss::Msfe);
        c.sample_sizes = {200};
        c.reps = 16;
        c.draws_h = 1000;
        c.threads = 1;
        const auto a = run_size_power(c);
        c.threads = 4;
        const auto b = run_size_power(c);
        REQUIRE(a.size() == 2);
        CHECK(a[0].panel == "size");
        CHECK(a[1].panel == "power");
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].two_step == b[i].two_step);
            CHECK(a[i].t_test == b[i].t_test);
            CHECK(a[i].standard == b[i].standard);
        }
        CHECK(SizePowerConfig::reference_defaults(Loss::LogScore).null_dgp.phi2 == -0.4421);
    }

    TEST_CASE("configuration checks") {
        McConfig c = small(TestMethod::SimulatedTwoStep, Loss::Msfe);
        c.benchmark = EstimationMethod::two_step();
        CHECK_THROWS_AS(c.validate(), ValidationError);
        c = small(TestMethod::SimulatedTwoStep, Loss::Msfe);
        c.alternative = EstimationMethod::one_step();
        CHECK_THROWS_AS(c.validate(), ValidationError);
        c = small(TestMethod::StandardNormal, Loss::Msfe);
        c.sample_sizes = {201};
        CHECK_THROWS_AS(c.validate(), ValidationError);
        c.sample_sizes = {200};
        c.alpha = 0.0;
        CHECK_THROWS_AS(c.validate(), ValidationError);
        CHECK_THROWS_AS(parse_test_method("bootstrap"), ValidationError);
        CHECK(parse_test_method("ttest") == TestMethod::EtaTTest);
        CHECK(resolve_threads(3) == 3);
        CHECK(resolve_threads(0) >= 1);
    }
}
