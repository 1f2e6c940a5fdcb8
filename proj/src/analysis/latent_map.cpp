#include "spv/analysis/latent_map.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "spv/analysis/metrics.hpp"

namespace spv::analysis {

LatentMap pca_map(const std::vector<Vec>& mus) {
    if (mus.size() < 3) throw std::invalid_argument("pca_map: need at least 3 records");
    const std::size_t n = mus.size(), d = mus[0].size();
    if (d < 2) throw std::invalid_argument("pca_map: latent dimension must be >= 2");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i) {
        if (mus[i].size() != d) throw std::invalid_argument("pca_map: inconsistent latent dimensions");
        for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mus[i][j];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::runtime_error("pca_map: eigendecomposition failed");
    const auto& values = eig.eigenvalues();  // ascending
    const auto& vectors = eig.eigenvectors();

    LatentMap map;
    map.mean.assign(mean.data(), mean.data() + d);
    const double total = std::max(0.0, values.sum());
    for (int k = 0; k < 2; ++k) {
        const Eigen::Index col = static_cast<Eigen::Index>(d) - 1 - k;
        Eigen::VectorXd v = vectors.col(col);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) v = -v;
        map.components[k].assign(v.data(), v.data() + d);
        map.explained_variance[k] = std::max(0.0, values(col));
    }
    map.explained_ratio = total > 0.0 ? (map.explained_variance[0] + map.explained_variance[1]) / total : 0.0;
    map.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * map.components[k][j];
            map.coords[i][k] = s;
        }
    return map;
}

namespace {

std::vector<double> pc1_of(const LatentMap& map) {
    std::vector<double> pc1(map.coords.size());
    for (std::size_t i = 0; i < pc1.size(); ++i) pc1[i] = map.coords[i][0];
    return pc1;
}

}  // namespace

double orient_pc1(LatentMap& map, const std::vector<double>& volumes) {
    double r = pearson_r(pc1_of(map), volumes);
    if (r < 0) {
        for (auto& c : map.coords) c[0] = -c[0];
        for (double& v : map.components[0]) v = -v;
        r = -r;
    }
    return r;
}

double pc1_volume_correlation(const LatentMap& map, const std::vector<double>& volumes) {
    return std::abs(pearson_r(pc1_of(map), volumes));
}

std::vector<Vec> principal_axis_latents(const LatentMap& map, std::size_t k) {
    if (k < 2) throw std::invalid_argument("principal_axis_latents: k must be >= 2");
    if (map.coords.empty()) throw std::invalid_argument("principal_axis_latents: empty map");
    double lo = map.coords[0][0], hi = lo;
    for (const auto& c : map.coords) lo = std::min(lo, c[0]), hi = std::max(hi, c[0]);
    std::vector<Vec> out(k, map.mean);
    for (std::size_t i = 0; i < k; ++i) {
        const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
        for (std::size_t j = 0; j < map.mean.size(); ++j) out[i][j] += t * map.components[0][j];
    }
    return out;
}

std::string latent_csv(const std::vector<LatentPoint>& points) {
    std::string out = "id,pc1,pc2,volume_ml,label\n";
    char buf[160];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.3f,%d\n", p.id.c_str(), p.pc1, p.pc2, p.volume_ml, p.splenomegaly ? 1 : 0);
        out += buf;
    }
    return out;
}

std::string latent_svg(const std::vector<LatentPoint>& points, const std::string& title) {
    constexpr double w = 640, h = 480, margin = 50;
    double x0 = 0, x1 = 1, y0 = 0, y1 = 1, v0 = 0, v1 = 1;
    if (!points.empty()) {
        x0 = x1 = points[0].pc1, y0 = y1 = points[0].pc2, v0 = v1 = points[0].volume_ml;
        for (const auto& p : points) {
            x0 = std::min(x0, p.pc1), x1 = std::max(x1, p.pc1);
            y0 = std::min(y0, p.pc2), y1 = std::max(y1, p.pc2);
            v0 = std::min(v0, p.volume_ml), v1 = std::max(v1, p.volume_ml);
        }
    }
    auto span = [](double a, double b) { return b > a ? b - a : 1.0; };
    auto sx = [&](double v) { return margin + (v - x0) / span(x0, x1) * (w - 2 * margin); };
    auto sy = [&](double v) { return h - margin - (v - y0) / span(y0, y1) * (h - 2 * margin); };
    char buf[320];
    std::string out;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n"
                  "<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                  w, h, w, h);
    out += buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">%s</text>\n", w / 2,
                  title.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n"
                  "<line x1=\"%.0f\" y1=\"%.0f\" x2=\"%.0f\" y2=\"%.0f\" stroke=\"black\"/>\n"
                  "<text x=\"%.0f\" y=\"%.0f\" font-size=\"12\" text-anchor=\"middle\">PC1</text>\n"
                  "<text x=\"14\" y=\"%.0f\" font-size=\"12\" transform=\"rotate(-90 14 %.0f)\">PC2</text>\n",
                  margin, h - margin, w - margin, h - margin, margin, margin, margin, h - margin, w / 2, h - 14, h / 2, h / 2);
    out += buf;
    for (const auto& p : points) {
        const double t = (p.volume_ml - v0) / span(v0, v1);
        const int red = static_cast<int>(std::lround(255 * t)), blue = 255 - red;
        const double cx = sx(p.pc1), cy = sy(p.pc2);
        if (p.splenomegaly) {
            std::snprintf(buf, sizeof buf,
                          "<path d=\"M%.1f %.1fL%.1f %.1fM%.1f %.1fL%.1f %.1f\" stroke=\"rgb(%d,0,%d)\" stroke-width=\"2\"/>\n",
                          cx - 4, cy - 4, cx + 4, cy + 4, cx - 4, cy + 4, cx + 4, cy - 4, red, blue);
        } else {
            std::snprintf(buf, sizeof buf, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3.5\" fill=\"rgb(%d,0,%d)\"/>\n", cx, cy, red, blue);
        }
        out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.0f\" y=\"44\" font-size=\"11\" text-anchor=\"end\">volume %.0f mL (blue) to %.0f mL (red); x = "
                  "splenomegaly</text>\n</svg>\n",
                  w - margin, v0, v1);
    out += buf;
    return out;
}

}  // namespace spv::analysis
