#include "pamm/beliefs.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pamm/experiment.hpp"

using namespace pamm;

namespace {

BeliefModel lognormal_model(std::vector<double> shares, double c_star = 3.0,
                            double sigma = 0.25, std::uint64_t seed = 7) {
    BeliefModel m;
    m.family = BeliefFamily::log_normal;
    m.c_star = c_star;
    m.sigma = sigma;
    m.shares = std::move(shares);
    m.seed = seed;
    return m;
}

}  // namespace

TEST(Beliefs, PointMassIsDegenerate) {
    BeliefModel m;
    m.family = BeliefFamily::point_mass;
    m.c_star = 3.0;
    m.shares = {0.5, 0.5};
    auto stats = sample_aggregate(m, 1000);
    for (double c : stats.samples) ASSERT_DOUBLE_EQ(c, 3.0);
    EXPECT_DOUBLE_EQ(stats.se, 0.0);
}

TEST(Beliefs, SingleProviderAggregateMatchesTheBaseDistribution) {
    auto m = lognormal_model({1.0}, 2.0, 0.3, 11);
    auto agg = sample_aggregate(m, 100000);

    // direct draws from the base distribution, independent stream
    std::mt19937_64 rng(999);
    double mu = std::log(2.0) - 0.5 * 0.3 * 0.3;
    std::vector<double> direct(100000);
    for (auto& d : direct) d = std::exp(mu + 0.3 * detail::normal01(rng));

    EXPECT_LE(oracle::ks_distance(agg.samples, direct), 0.02);
}

TEST(Beliefs, EqualSharesHalveTheLogVariance) {
    auto m = lognormal_model({0.5, 0.5}, 3.0, 0.4, 13);
    auto agg = sample_aggregate(m, 200000);
    // aggregate ~ LogNormal(mu, sigma/sqrt(2)) with mu = ln c* - sigma^2/2,
    // so its mean is exp(mu + sigma^2/4)
    double mu = std::log(3.0) - 0.5 * 0.4 * 0.4;
    double analytic_mean = std::exp(mu + 0.4 * 0.4 / 4.0);
    EXPECT_NEAR(agg.mean, analytic_mean, 3.0 * agg.se);
}

TEST(Beliefs, MisreportCouplingIsExact) {
    auto m = lognormal_model({0.5, 0.5});
    auto honest = sample_aggregate(m, 50000);

    auto identity = misreport_aggregate(m, 0, 1.0, 50000);
    for (std::size_t i = 0; i < honest.samples.size(); ++i)
        ASSERT_EQ(identity.samples[i], honest.samples[i]);  // bit-exact at a = 1

    auto scaled = misreport_aggregate(m, 0, 2.0, 50000);
    double factor = std::pow(2.0, 0.5);
    for (std::size_t i = 0; i < honest.samples.size(); ++i)
        ASSERT_EQ(scaled.samples[i], factor * honest.samples[i]);
    EXPECT_NEAR(scaled.mean / honest.mean, factor, 1e-12);

    auto sole = lognormal_model({1.0});
    auto quad = misreport_aggregate(sole, 0, 4.0, 20000);
    auto base = sample_aggregate(sole, 20000);
    for (std::size_t i = 0; i < base.samples.size(); ++i)
        ASSERT_EQ(quad.samples[i], 4.0 * base.samples[i]);
}

TEST(Beliefs, DensityTransform) {
    auto m = lognormal_model({0.5, 0.5}, 3.0, 0.25, 17);

    auto identity = density_transform_check(m, 0, 1.0, 64, 200000);
    EXPECT_DOUBLE_EQ(identity.max_discrepancy, 0.0);  // exact under coupling

    auto scaled = density_transform_check(m, 0, 2.0, 64, 1000000);
    EXPECT_LE(scaled.max_discrepancy, 0.01);

    auto single_bin = density_transform_check(m, 0, 2.0, 1, 100000);
    EXPECT_LE(single_bin.max_discrepancy, 1e-9);  // total mass on both sides is 1
    double width_mass = single_bin.observed[0];
    EXPECT_GT(width_mass, 0.0);

    EXPECT_THROW(density_transform_check(m, 0, 2.0, 64, 1000), DomainError);
}

TEST(Beliefs, ProfitFunctionContract) {
    auto r = ProfitFunction::peaked_log_gaussian(3.0);
    EXPECT_DOUBLE_EQ(r(3.0), 1.0);
    EXPECT_TRUE(validate_profit_function(r, 3.0));

    ProfitFunction flat{[](double) { return 1.0; }};
    EXPECT_FALSE(validate_profit_function(flat, 3.0));
}

TEST(Beliefs, HonestyExperimentControlRow) {
    auto m = lognormal_model({0.5, 0.5});
    auto r = ProfitFunction::peaked_log_gaussian(3.0);
    auto rows = honesty_experiment(m, r, 0, {1.0}, 100000);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_DOUBLE_EQ(rows[0].mean_honest, rows[0].mean_misreport);  // coupled at a = 1
    EXPECT_FALSE(rows[0].flagged);
}

TEST(Beliefs, HonestyExperimentPointMassIsDeterministic) {
    BeliefModel m;
    m.family = BeliefFamily::point_mass;
    m.c_star = 3.0;
    m.shares = {0.5, 0.5};
    auto r = ProfitFunction::peaked_log_gaussian(3.0);
    auto rows = honesty_experiment(m, r, 0, {2.0}, 100000);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_DOUBLE_EQ(rows[0].mean_honest, 1.0);
    // averaging 1e5 identical terms accumulates a little rounding
    EXPECT_NEAR(rows[0].mean_misreport, r(std::pow(2.0, 0.5) * 3.0), 1e-9);
    EXPECT_TRUE(rows[0].flagged);  // strict gap, zero variance
}

TEST(Beliefs, HonestyExperimentFlagsMisreports) {
    auto m = lognormal_model({0.5, 0.5}, 3.0, 0.25, 19);
    auto r = ProfitFunction::peaked_log_gaussian(3.0);
    auto rows = honesty_experiment(m, r, 0, {0.5, 2.0}, 100000);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& row : rows) {
        EXPECT_GT(row.mean_honest, row.mean_misreport);
        EXPECT_TRUE(row.flagged) << "a = " << row.a;
    }
}

TEST(Beliefs, Reproducibility) {
    auto m = lognormal_model({0.3, 0.7}, 2.5, 0.2, 23);
    auto r = ProfitFunction::peaked_log_gaussian(2.5);
    auto rows1 = honesty_experiment(m, r, 1, {0.5, 1.0, 2.0}, 100000);
    auto rows2 = honesty_experiment(m, r, 1, {0.5, 1.0, 2.0}, 100000);
    ASSERT_EQ(rows1.size(), rows2.size());
    for (std::size_t i = 0; i < rows1.size(); ++i) {
        ASSERT_EQ(rows1[i].mean_honest, rows2[i].mean_honest);
        ASSERT_EQ(rows1[i].mean_misreport, rows2[i].mean_misreport);
        ASSERT_EQ(rows1[i].se_honest, rows2[i].se_honest);
        ASSERT_EQ(rows1[i].flagged, rows2[i].flagged);
    }

    auto s1 = sample_aggregate(m, 5000);
    auto s2 = sample_aggregate(m, 5000);
    for (std::size_t i = 0; i < s1.samples.size(); ++i)
        ASSERT_EQ(s1.samples[i], s2.samples[i]);
}

TEST(Beliefs, BundledExperimentRunsAndWritesTheTable) {
    auto path = std::filesystem::path(PAMM_SOURCE_DIR) / "experiments" /
                "beliefs_default.json";
    std::ifstream in(path);
    ASSERT_TRUE(in.good());
    auto ex = load_experiment(in);
    EXPECT_EQ(ex.model.shares.size(), 2u);

    // shrink the density budget for unit-test speed; acceptance runs it full
    ex.density_replicas = 100000;
    auto res = run_experiment(ex);
    EXPECT_DOUBLE_EQ(res.coupling_error, 0.0);
    EXPECT_LE(res.density.max_discrepancy, 0.05);
    ASSERT_EQ(res.rows.size(), 3u);
    EXPECT_TRUE(res.rows[0].flagged);   // a = 0.5
    EXPECT_FALSE(res.rows[1].flagged);  // a = 1 control
    EXPECT_TRUE(res.rows[2].flagged);   // a = 2

    std::ostringstream csv;
    write_honesty_csv(csv, res.rows);
    std::string text = csv.str();
    EXPECT_NE(text.find("a,mean_honest,mean_misreport,se_honest,se_misreport,flag"),
              std::string::npos);
    EXPECT_NE(text.find("\n0.5,"), std::string::npos);
}

TEST(Beliefs, ModelValidation) {
    BeliefModel bad;
    bad.shares = {0.5, 0.6};
    EXPECT_THROW(bad.validate(), ValidationError);
    bad.shares = {};
    EXPECT_THROW(bad.validate(), ValidationError);
    bad.shares = {1.0};
    bad.c_star = -1.0;
    EXPECT_THROW(bad.validate(), ValidationError);

    auto m = lognormal_model({1.0});
    EXPECT_THROW(misreport_aggregate(m, 5, 2.0, 1000), DomainError);
    EXPECT_THROW(misreport_aggregate(m, 0, -2.0, 1000), DomainError);
}
