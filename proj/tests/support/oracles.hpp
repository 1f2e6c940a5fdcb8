#pragma once

// Independent reference implementations used as test oracles.

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spv/estimators/estimators.hpp"
#include "spv/phantom/mask2d.hpp"

namespace spv::testing {

using phantom::Mask2D;
using estimators::LatentEntry;
using estimators::TrainingLatentIndex;

// Cyclic Jacobi eigenvalue iteration for a symmetric matrix (row-major).
inline void jacobi_eigen(std::vector<std::vector<double>> a, std::vector<double>& values, std::vector<std::vector<double>>& vectors) {
    const std::size_t n = a.size();
    vectors.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) vectors[i][i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = vectors[k][p], vkq = vectors[k][q];
                    vectors[k][p] = c * vkp - s * vkq;
                    vectors[k][q] = s * vkp + c * vkq;
                }
            }
    }
    values.resize(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = a[i][i];
}

inline Mask2D random_mask(std::mt19937_64& rng, std::size_t n, double p) {
    Mask2D m(n, n);
    std::bernoulli_distribution b(p);
    for (auto& v : m.px) v = b(rng);
    if (m.empty()) m.px[rng() % m.px.size()] = 1;
    return m;
}

inline double brute_hausdorff(const Mask2D& a, const Mask2D& b) {
    auto edge = [](const Mask2D& m) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t r = 0; r < m.rows; ++r)
            for (std::size_t c = 0; c < m.cols; ++c) {
                if (!m.at(r, c)) continue;
                const bool inner = r > 0 && c > 0 && r + 1 < m.rows && c + 1 < m.cols && m.at(r - 1, c) && m.at(r + 1, c) &&
                                   m.at(r, c - 1) && m.at(r, c + 1);
                if (!inner) pts.emplace_back(r, c);
            }
        return pts;
    };
    const auto pa = edge(a), pb = edge(b);
    auto dir = [](const auto& from, const auto& to) {
        double worst = 0.0;
        for (auto [r, c] : from) {
            double best = 1e300;
            for (auto [r2, c2] : to) best = std::min(best, std::hypot(r - r2, c - c2));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(dir(pa, pb), dir(pb, pa));
}

// Least squares via the normal equations and Gauss-Jordan elimination; returns
// the D weights followed by the intercept.
inline std::vector<double> normal_equations(const TrainingLatentIndex& idx) {
    const std::size_t d = idx[0].mu.size(), p = d + 1;
    std::vector<std::vector<double>> m(p, std::vector<double>(p + 1, 0.0));
    for (const auto& e : idx) {
        std::vector<double> row(e.mu);
        row.push_back(1.0);
        for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t j = 0; j < p; ++j) m[i][j] += row[i] * row[j];
            m[i][p] += row[i] * e.volume_ml;
        }
    }
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        std::swap(m[c], m[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k <= p; ++k) m[r][k] -= f * m[c][k];
        }
    }
    std::vector<double> beta(p);
    for (std::size_t i = 0; i < p; ++i) beta[i] = m[i][p] / m[i][i];
    return beta;
}

inline TrainingLatentIndex planted(std::size_t n, std::size_t d, std::uint64_t seed, std::vector<double>& w, double& b) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    w.assign(d, 0.0);
    for (double& v : w) v = 50.0 * g(rng);
    b = 300.0;
    TrainingLatentIndex idx;
    for (std::size_t i = 0; i < n; ++i) {
        LatentEntry e;
        e.id = "r" + std::to_string(1000 + i);
        e.mu.resize(d);
        e.volume_ml = b;
        for (std::size_t j = 0; j < d; ++j) e.mu[j] = g(rng), e.volume_ml += w[j] * e.mu[j];
        idx.push_back(e);
    }
    return idx;
}

}  // namespace spv::testing
