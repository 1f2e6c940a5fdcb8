#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spv/analysis/latent_map.hpp"
#include "spv/analysis/metrics.hpp"
#include "../support/oracles.hpp"

using namespace spv::analysis;
using spv::testing::brute_hausdorff;
using spv::testing::jacobi_eigen;
using spv::testing::random_mask;

TEST(Mrva, Examples) {
    EXPECT_DOUBLE_EQ(mrva({100, 250, 400}, {100, 250, 400}).mean, 100.0);
    EXPECT_DOUBLE_EQ(mrva({100}, {90}).mean, 90.0);
    EXPECT_DOUBLE_EQ(mrva({100}, {200}).mean, 0.0);
    EXPECT_DOUBLE_EQ(mrva({100}, {300}).mean, -100.0);
    const auto m = mrva({100, 100}, {90, 110});
    EXPECT_DOUBLE_EQ(m.mean, 90.0);
    EXPECT_DOUBLE_EQ(m.std, 0.0);
    const auto s = mrva({100, 100}, {100, 80});
    EXPECT_DOUBLE_EQ(s.mean, 90.0);
    EXPECT_DOUBLE_EQ(s.std, 10.0);
    EXPECT_THROW(mrva({0.0}, {1.0}), std::invalid_argument);
}

TEST(Mrva, ScaleInvariant) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(50, 600);
    std::vector<double> t(40), e(40), t2(40), e2(40);
    for (int i = 0; i < 40; ++i) t[i] = u(rng), e[i] = u(rng), t2[i] = 4.0 * t[i], e2[i] = 4.0 * e[i];
    EXPECT_NEAR(mrva(t, e).mean, mrva(t2, e2).mean, 1e-9);
}

TEST(Pearson, ExamplesAgainstDirectFormula) {
    const std::vector<double> x{1, 2, 3}, y{2, 4, 7};
    const double n = 3, sx = 6, sy = 13, sxy = 1 * 2 + 2 * 4 + 3 * 7, sxx = 14, syy = 4 + 16 + 49;
    const double oracle = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
    EXPECT_NEAR(pearson_r(x, y), oracle, 1e-12);
    EXPECT_NEAR(pearson_r(x, y), 0.9934, 5e-5);
    EXPECT_DOUBLE_EQ(pearson_r(x, x), 1.0);
    EXPECT_NEAR(pearson_r(x, {7, 6, 5}), -1.0, 1e-15);
    EXPECT_THROW(pearson_r(x, {1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(pearson_r({1}, {2}), std::invalid_argument);
}

TEST(Mcia, CountsInclusively) {
    EXPECT_DOUBLE_EQ(mcia({100, 200}, {{90, 110}, {150, 250}}), 100.0);
    EXPECT_DOUBLE_EQ(mcia({100, 200}, {{110, 120}, {10, 20}}), 0.0);
    EXPECT_DOUBLE_EQ(mcia({100, 200}, {{90, 110}, {10, 20}}), 50.0);
    EXPECT_DOUBLE_EQ(mcia({100, 200}, {{100, 100}, {150, 200}}), 100.0);
    EXPECT_THROW(mcia({100}, {{120, 80}}), std::invalid_argument);
}

TEST(Classification, ConfusionRates) {
    const auto perfect = sen_spe_acc({100, 400, 200, 500}, {100, 400, 200, 500});
    EXPECT_DOUBLE_EQ(*perfect.sen, 100.0);
    EXPECT_DOUBLE_EQ(*perfect.spe, 100.0);
    EXPECT_DOUBLE_EQ(perfect.acc, 100.0);
    const auto neg = sen_spe_acc({100, 400, 200, 500}, {100, 100, 100, 100});
    EXPECT_DOUBLE_EQ(*neg.sen, 0.0);
    EXPECT_DOUBLE_EQ(*neg.spe, 100.0);
    EXPECT_DOUBLE_EQ(neg.acc, 50.0);
    const auto boundary = sen_spe_acc({314.5}, {314.5});
    EXPECT_FALSE(boundary.sen.has_value());
    EXPECT_DOUBLE_EQ(*boundary.spe, 100.0);
}

TEST(Dice, Examples) {
    Mask2D a(20, 20), b(20, 20);
    EXPECT_DOUBLE_EQ(dice(a, b), 1.0);
    for (std::size_t i = 0; i < 100; ++i) a.px[i] = 1;
    for (std::size_t i = 50; i < 150; ++i) b.px[i] = 1;
    EXPECT_DOUBLE_EQ(dice(a, b), 0.5);
    EXPECT_DOUBLE_EQ(dice(b, a), 0.5);
    EXPECT_DOUBLE_EQ(dice(a, a), 1.0);
    Mask2D c(20, 20);
    for (std::size_t i = 300; i < 350; ++i) c.px[i] = 1;
    EXPECT_DOUBLE_EQ(dice(a, c), 0.0);
    EXPECT_THROW(dice(a, Mask2D(20, 21)), std::invalid_argument);
}

TEST(Hausdorff, Examples) {
    Mask2D a(12, 12), b(12, 12);
    a.at(4, 4) = 1;
    b.at(4, 7) = 1;
    EXPECT_DOUBLE_EQ(hausdorff(a, a, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(hausdorff(a, b, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(hausdorff(a, b, 2.5), 7.5);
    Mask2D sa(12, 12), sb(12, 12);
    for (std::size_t r = 2; r < 5; ++r)
        for (std::size_t c = 2; c < 5; ++c) sa.at(r, c) = 1, sb.at(r + 3, c) = 1;
    EXPECT_DOUBLE_EQ(hausdorff(sa, sb, 1.0), 3.0);
    EXPECT_THROW(hausdorff(a, Mask2D(12, 12), 1.0), std::invalid_argument);
}

TEST(Hausdorff, MatchesBruteForceOnRandomMasks) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 80; ++trial) {
        const std::size_t n = 4 + trial % 13;
        const double p = 0.1 + 0.1 * (trial % 7);
        const auto a = random_mask(rng, n, p), b = random_mask(rng, n, p);
        const double h = hausdorff(a, b, 1.0);
        EXPECT_DOUBLE_EQ(h, brute_hausdorff(a, b)) << trial;
        EXPECT_DOUBLE_EQ(h, hausdorff(b, a, 1.0));
    }
}

TEST(Pca, MatchesJacobiOracle) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 60, d = 8;
    std::vector<Vec> mus(n, Vec(d));
    for (auto& m : mus)
        for (std::size_t j = 0; j < d; ++j) m[j] = g(rng) * (1.0 + j) + 0.5 * j;
    const auto map = pca_map(mus);

    Vec mean(d, 0.0);
    for (const auto& m : mus)
        for (std::size_t j = 0; j < d; ++j) mean[j] += m[j] / n;
    std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
    for (const auto& m : mus)
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) cov[i][j] += (m[i] - mean[i]) * (m[j] - mean[j]) / (n - 1);
    std::vector<double> vals;
    std::vector<std::vector<double>> vecs;
    jacobi_eigen(cov, vals, vecs);
    std::vector<std::size_t> order(d);
    for (std::size_t i = 0; i < d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return vals[x] > vals[y]; });
    for (int k = 0; k < 2; ++k) {
        EXPECT_NEAR(map.explained_variance[k], vals[order[k]], 1e-8);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += map.components[k][j] * vecs[j][order[k]];
        EXPECT_NEAR(std::abs(dot), 1.0, 1e-8);
    }
    double dot01 = 0.0, n0 = 0.0, n1 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        dot01 += map.components[0][j] * map.components[1][j];
        n0 += map.components[0][j] * map.components[0][j];
        n1 += map.components[1][j] * map.components[1][j];
    }
    EXPECT_NEAR(dot01, 0.0, 1e-8);
    EXPECT_NEAR(n0, 1.0, 1e-8);
    EXPECT_NEAR(n1, 1.0, 1e-8);
    double c0 = 0.0, c1 = 0.0;
    for (const auto& c : map.coords) c0 += c[0], c1 += c[1];
    EXPECT_NEAR(c0 / n, 0.0, 1e-9);
    EXPECT_NEAR(c1 / n, 0.0, 1e-9);
}

TEST(Pca, PlanarDataExplainedFully) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t d = 16;
    Vec u(d), v(d), o(d);
    for (std::size_t j = 0; j < d; ++j) u[j] = g(rng), v[j] = g(rng), o[j] = g(rng);
    std::vector<Vec> mus;
    for (int i = 0; i < 30; ++i) {
        const double s = g(rng), t = g(rng);
        Vec m(d);
        for (std::size_t j = 0; j < d; ++j) m[j] = o[j] + s * u[j] + t * v[j];
        mus.push_back(m);
    }
    EXPECT_NEAR(pca_map(mus).explained_ratio, 1.0, 1e-10);
    EXPECT_THROW(pca_map({u, v}), std::invalid_argument);
}

TEST(Pca, Pc1VolumeCorrelationAndAxisSampling) {
    std::vector<Vec> mus;
    std::vector<double> vols;
    for (int i = 0; i < 10; ++i) {
        mus.push_back({10.0 * i, 0.1 * ((i * 7) % 3), 0.0});
        vols.push_back(100.0 + 30.0 * i);
    }
    auto map = pca_map(mus);
    EXPECT_NEAR(pc1_volume_correlation(map, vols), 1.0, 1e-9);
    EXPECT_NEAR(orient_pc1(map, vols), 1.0, 1e-9);
    EXPECT_GT(map.coords[9][0], map.coords[0][0]);
    const auto ends = principal_axis_latents(map, 2);
    ASSERT_EQ(ends.size(), 2u);
    EXPECT_NEAR(ends[0][0], 0.0, 0.5);
    EXPECT_NEAR(ends[1][0], 90.0, 0.5);
    const auto five = principal_axis_latents(map, 5);
    for (std::size_t i = 1; i < 5; ++i) EXPECT_GT(five[i][0], five[i - 1][0]);
    EXPECT_THROW(principal_axis_latents(map, 1), std::invalid_argument);
    EXPECT_THROW(pc1_volume_correlation(map, std::vector<double>(10, 5.0)), std::invalid_argument);
}

TEST(LatentExport, CsvAndSvg) {
    std::vector<LatentPoint> pts{{"p0001", 1.0, 2.0, 120.0, false}, {"p0002", -1.0, 0.5, 420.0, true}};
    const auto csv = latent_csv(pts);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,pc1,pc2,volume_ml,label");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    const auto svg = latent_svg(pts, "latent map");
    EXPECT_EQ(svg.find("<svg"), 0u);
    EXPECT_NE(svg.find("<circle"), std::string::npos);
    EXPECT_NE(svg.find("<path"), std::string::npos);
}
