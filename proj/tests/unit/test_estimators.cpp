#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spv/estimators/estimators.hpp"
#include "../support/oracles.hpp"

using namespace spv::estimators;
using spv::testing::normal_equations;
using spv::testing::planted;

TEST(NearestNeighbour, Examples) {
    TrainingLatentIndex idx{{{0, 0}, 100, "a"}, {{10, 10}, 500, "b"}};
    EXPECT_DOUBLE_EQ(nn_estimate({1, 1}, idx).vol_ml, 100.0);
    EXPECT_DOUBLE_EQ(nn_estimate({9, 9}, idx).vol_ml, 500.0);
    EXPECT_DOUBLE_EQ(nn_estimate({5, 5}, idx).vol_ml, 100.0);
    TrainingLatentIndex rev{{{10, 10}, 500, "a"}, {{0, 0}, 100, "b"}};
    EXPECT_DOUBLE_EQ(nn_estimate({5, 5}, rev).vol_ml, 500.0);
    EXPECT_THROW(nn_estimate({1, 1}, {}), std::invalid_argument);
    EXPECT_THROW(nn_estimate({1}, idx), std::invalid_argument);
}

TEST(NearestNeighbour, SelfRetrievalAndScaling) {
    std::vector<double> w;
    double b;
    auto idx = planted(120, 32, 3, w, b);
    for (const auto& e : idx) EXPECT_EQ(nn_estimate(e.mu, idx).vol_ml, e.volume_ml);
    auto scaled = idx;
    for (auto& e : scaled) e.volume_ml *= 3.0;
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(nn_estimate(idx[i].mu, scaled).vol_ml, 3.0 * idx[i].volume_ml);
}

TEST(PosthocLinearRegression, RecoversPlantedMapAgainstOracle) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::vector<double> w;
        double b;
        const auto idx = planted(120, 32, seed, w, b);
        const auto m = plr_fit(idx);
        EXPECT_FALSE(m.ridge);
        const auto oracle = normal_equations(idx);
        double worst = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            worst = std::max(worst, std::abs(m.weights[j] - oracle[j]));
            worst = std::max(worst, std::abs(m.weights[j] - w[j]));
        }
        worst = std::max(worst, std::abs(m.intercept - oracle.back()));
        worst = std::max(worst, std::abs(m.intercept - b));
        EXPECT_LT(worst, 1e-8);
        double resid = 0.0;
        for (const auto& e : idx) resid = std::max(resid, std::abs(plr_estimate(e.mu, m).vol_ml - e.volume_ml));
        EXPECT_LT(resid, 1e-8);
    }
}

TEST(PosthocLinearRegression, NoisyFitMatchesOracle) {
    std::vector<double> w;
    double b;
    auto idx = planted(90, 8, 9, w, b);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 20.0);
    for (auto& e : idx) e.volume_ml += g(rng);
    const auto m = plr_fit(idx);
    const auto oracle = normal_equations(idx);
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(m.weights[j], oracle[j], 1e-8);
    EXPECT_NEAR(m.intercept, oracle.back(), 1e-8);
}

TEST(PosthocLinearRegression, ConstantAndDegenerateTargets) {
    std::vector<double> w;
    double b;
    auto idx = planted(50, 4, 2, w, b);
    for (auto& e : idx) e.volume_ml = 250.0;
    const auto m = plr_fit(idx);
    for (double v : m.weights) EXPECT_NEAR(v, 0.0, 1e-10);
    EXPECT_NEAR(m.intercept, 250.0, 1e-10);

    TrainingLatentIndex same{{{1, 2}, 100, "a"}, {{1, 2}, 300, "b"}, {{1, 2}, 200, "c"}};
    const auto d = plr_fit(same);
    EXPECT_TRUE(d.intercept_only);
    EXPECT_DOUBLE_EQ(d.intercept, 200.0);
    EXPECT_DOUBLE_EQ(plr_estimate({5, 5}, d).vol_ml, 200.0);
    EXPECT_THROW(plr_fit({same[0]}), std::invalid_argument);
}

TEST(PosthocLinearRegression, UnderdeterminedUsesRidge) {
    std::vector<double> w;
    double b;
    const auto idx = planted(10, 32, 6, w, b);
    const auto m = plr_fit(idx);
    EXPECT_TRUE(m.ridge);
    for (const auto& e : idx) EXPECT_NEAR(plr_estimate(e.mu, m).vol_ml, e.volume_ml, 1e-3);
}

TEST(PosthocLinearRegression, ScalesWithTargets) {
    std::vector<double> w;
    double b;
    auto idx = planted(60, 6, 8, w, b);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 30.0);
    for (auto& e : idx) e.volume_ml += g(rng);
    auto scaled = idx;
    for (auto& e : scaled) e.volume_ml *= 2.5;
    const auto m = plr_fit(idx), ms = plr_fit(scaled);
    for (std::size_t i = 0; i < 5; ++i)
        EXPECT_NEAR(plr_estimate(idx[i].mu, ms).vol_ml, 2.5 * plr_estimate(idx[i].mu, m).vol_ml, 1e-8);
}

TEST(ConfidenceIntervals, HandArithmetic) {
    const auto e = ci_from_samples({90.0, 110.0});
    EXPECT_DOUBLE_EQ(e.ci->eta, 100.0);
    EXPECT_DOUBLE_EQ(e.ci->theta, 10.0);
    EXPECT_NEAR(e.ci->low, 80.4, 1e-12);
    EXPECT_NEAR(e.ci->high, 119.6, 1e-12);
    EXPECT_NEAR(e.ci->high - e.ci->low, 3.92 * e.ci->theta, 1e-12);
    EXPECT_NEAR((e.ci->high + e.ci->low) / 2, e.ci->eta, 1e-12);
    const auto flat = ci_from_samples({42.0, 42.0, 42.0});
    EXPECT_EQ(flat.ci->theta, 0.0);
    EXPECT_EQ(flat.ci->low, flat.ci->high);
    EXPECT_THROW(ci_from_samples({1.0}), std::invalid_argument);
}

TEST(ConfidenceIntervals, GaussianCoverage) {
    // Calibrated toy: truth and the sampled estimates share one Gaussian.
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> centre(100, 600), spread(5, 60);
    const int trials = 10000;
    int covered = 0;
    for (int t = 0; t < trials; ++t) {
        const double m = centre(rng), s = spread(rng);
        const double truth = m + s * g(rng);
        std::vector<double> draws(100);
        for (double& v : draws) v = m + s * g(rng);
        const auto ci = *ci_from_samples(draws).ci;
        covered += ci.low <= truth && truth <= ci.high;
    }
    EXPECT_NEAR(100.0 * covered / trials, 95.0, 3.0);
}

TEST(ConfidenceIntervals, ZeroSigmaGivesZeroWidth) {
    spv::vae::VAEConfig cfg;
    cfg.head_input = spv::vae::HeadInput::Z;
    spv::vae::VAE model(cfg, 3);
    for (auto& p : model.store().params())
        if (p.name == "enc.fc_logvar.weight" || p.name == "enc.fc_logvar.bias") {
            auto v = p.var;
            v.mutable_value().fill(p.name == "enc.fc_logvar.bias" ? -2000.0 : 0.0);
        }
    const auto est = rvae_ci(model, {spv::grad::Tensor({1, 64, 64}, 1.0)}, 20, 5);
    EXPECT_EQ(est[0].ci->theta, 0.0);
    EXPECT_EQ(est[0].ci->low, est[0].ci->high);
    EXPECT_THROW(rvae_ci(model, {spv::grad::Tensor({1, 64, 64}, 1.0)}, 1, 5), std::invalid_argument);
}

TEST(RvaeEstimate, FloorsAtZero) {
    const auto neg = rvae_from_output(-3.0, 10.0);
    EXPECT_EQ(neg.vol_ml, 0.0);
    EXPECT_EQ(neg.raw_ml, -30.0);
    EXPECT_DOUBLE_EQ(rvae_from_output(12.5, 10.0).vol_ml, 125.0);
}

TEST(Clinical, LengthFormula) {
    EXPECT_NEAR(clinical_length(5.8006).vol_ml, 0.0, 1e-9);
    EXPECT_NEAR(clinical_length(18.4006).vol_ml, 1000.0, 1e-9);
    EXPECT_NEAR(clinical_length(12.0).vol_ml, 492.016, 1e-3);
    const auto small = clinical_length(4.0);
    EXPECT_LT(small.vol_ml, 0.0);
    EXPECT_TRUE(small.flagged);
}

TEST(Clinical, ThreeMeasureFormula) {
    EXPECT_NEAR(clinical_three_measure(0, 0, 0).vol_ml, 30.0, 1e-9);
    EXPECT_NEAR(clinical_three_measure(10, 10, 1).vol_ml, 88.0, 1e-9);
    const double base = clinical_three_measure(11, 6, 4).vol_ml - 30.0;
    EXPECT_DOUBLE_EQ(clinical_three_measure(11, 6, 8).vol_ml - 30.0, 2.0 * base);
}
