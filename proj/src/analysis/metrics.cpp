#include "spv/analysis/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace spv::analysis {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

void require_same_shape(const Mask2D& a, const Mask2D& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols) throw std::invalid_argument(std::string(what) + ": mask shapes differ");
}

// One-dimensional squared-distance transform (lower envelope of parabolas).
void edt_1d(const double* f, double* d, std::size_t n, std::vector<int>& v, std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (std::size_t q = 1; q < n; ++q) {
        if (f[q] == inf) continue;
        if (f[v[k]] == inf) {
            v[k] = static_cast<int>(q);
            continue;
        }
        double s;
        while (true) {
            const double p = v[k];
            s = ((f[q] + q * q) - (f[v[k]] + p * p)) / (2.0 * q - 2.0 * p);
            if (s <= z[k] && k > 0) --k;
            else break;
        }
        ++k;
        v[k] = static_cast<int>(q);
        z[k] = s;
        z[k + 1] = inf;
    }
    if (f[v[0]] == inf) {
        std::fill(d, d + n, inf);
        return;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double dq = static_cast<double>(q) - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

// Squared Euclidean distance from every pixel to the nearest seed pixel.
std::vector<double> squared_distance_field(const std::vector<std::pair<int, int>>& seeds, std::size_t rows,
                                           std::size_t cols) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> g(rows * cols, inf);
    for (auto [r, c] : seeds) g[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)] = 0.0;
    const std::size_t n = std::max(rows, cols);
    std::vector<double> f(n), d(n);
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    for (std::size_t c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < rows; ++r) f[r] = g[r * cols + c];
        edt_1d(f.data(), d.data(), rows, v, z);
        for (std::size_t r = 0; r < rows; ++r) g[r * cols + c] = d[r];
    }
    for (std::size_t r = 0; r < rows; ++r) {
        edt_1d(&g[r * cols], d.data(), cols, v, z);
        std::copy(d.begin(), d.begin() + static_cast<long>(cols), g.begin() + static_cast<long>(r * cols));
    }
    return g;
}

double directed(const std::vector<std::pair<int, int>>& from, const std::vector<double>& field, std::size_t cols) {
    double worst = 0.0;
    for (auto [r, c] : from) worst = std::max(worst, field[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)]);
    return std::sqrt(worst);
}

}  // namespace

std::vector<double> relative_accuracy(const std::vector<double>& truths, const std::vector<double>& estimates) {
    require_same_length(truths.size(), estimates.size(), "mrva");
    std::vector<double> out(truths.size());
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!(truths[i] > 0.0)) throw std::invalid_argument("mrva: truths must be positive");
        out[i] = (1.0 - std::abs(estimates[i] - truths[i]) / truths[i]) * 100.0;
    }
    return out;
}

MeanStd mrva(const std::vector<double>& truths, const std::vector<double>& estimates) {
    const auto acc = relative_accuracy(truths, estimates);
    if (acc.empty()) throw std::invalid_argument("mrva: no samples");
    MeanStd m;
    for (double a : acc) m.mean += a;
    m.mean /= static_cast<double>(acc.size());
    for (double a : acc) m.std += (a - m.mean) * (a - m.mean);
    m.std = std::sqrt(m.std / static_cast<double>(acc.size()));
    return m;
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    require_same_length(x.size(), y.size(), "pearson_r");
    if (x.size() < 2) throw std::invalid_argument("pearson_r: need at least two samples");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double mcia(const std::vector<double>& truths, const std::vector<Interval>& cis) {
    require_same_length(truths.size(), cis.size(), "mcia");
    if (truths.empty()) throw std::invalid_argument("mcia: no samples");
    std::size_t inside = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!(cis[i].low <= cis[i].high)) throw std::invalid_argument("mcia: malformed interval");
        inside += cis[i].low <= truths[i] && truths[i] <= cis[i].high;
    }
    return 100.0 * static_cast<double>(inside) / static_cast<double>(truths.size());
}

Classification sen_spe_acc(const std::vector<double>& truths, const std::vector<double>& estimates, double threshold) {
    require_same_length(truths.size(), estimates.size(), "sen_spe_acc");
    if (truths.empty()) throw std::invalid_argument("sen_spe_acc: no samples");
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool t = truths[i] > threshold, e = estimates[i] > threshold;
        tp += t && e, tn += !t && !e, fp += !t && e, fn += t && !e;
    }
    Classification c;
    if (tp + fn > 0) c.sen = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tn + fp > 0) c.spe = 100.0 * static_cast<double>(tn) / static_cast<double>(tn + fp);
    c.acc = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(truths.size());
    return c;
}

double dice(const Mask2D& a, const Mask2D& b) {
    require_same_shape(a, b, "dice");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.px.size(); ++i) {
        na += a.px[i] != 0;
        nb += b.px[i] != 0;
        both += a.px[i] && b.px[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

std::vector<std::pair<int, int>> boundary_pixels(const Mask2D& m) {
    std::vector<std::pair<int, int>> out;
    const int rows = static_cast<int>(m.rows), cols = static_cast<int>(m.cols);
    auto occupied = [&](int r, int c) {
        return r >= 0 && c >= 0 && r < rows && c < cols && m.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            if (occupied(r, c) && (!occupied(r - 1, c) || !occupied(r + 1, c) || !occupied(r, c - 1) || !occupied(r, c + 1)))
                out.emplace_back(r, c);
    return out;
}

double hausdorff(const Mask2D& a, const Mask2D& b, double spacing_mm) {
    require_same_shape(a, b, "hausdorff");
    const auto ba = boundary_pixels(a), bb = boundary_pixels(b);
    if (ba.empty() || bb.empty()) throw std::invalid_argument("hausdorff: empty mask");
    const double ab = directed(ba, squared_distance_field(bb, a.rows, a.cols), a.cols);
    const double ba_d = directed(bb, squared_distance_field(ba, a.rows, a.cols), a.cols);
    return std::max(ab, ba_d) * spacing_mm;
}

MetricReport make_report(const std::vector<double>& truths, const std::vector<double>& estimates,
                         const std::vector<Interval>* cis) {
    MetricReport r;
    r.mrva = mrva(truths, estimates);
    try {
        r.pearson = pearson_r(truths, estimates);
    } catch (const std::invalid_argument&) {
    }
    if (cis) r.mcia = mcia(truths, *cis);
    r.cls = sen_spe_acc(truths, estimates);
    return r;
}

}  // namespace spv::analysis
