#include "spv/ussim/ussim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "spv/common/rng.hpp"

namespace spv::ussim {

namespace {

bool in_sector(const ConeParams& p, double r, double c) {
    const double dy = r - p.apex_row, dx = c - p.apex_col;
    const double dist = std::hypot(dx, dy);
    if (dist < p.inner_radius || dist > p.outer_radius) return false;
    const double angle = std::atan2(std::abs(dx), dy) * 180.0 / std::numbers::pi;
    return angle <= p.width_deg / 2.0;
}

double centroid_axis(const Mask2D& m, bool rows) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            if (m.at(r, c)) {
                sum += static_cast<double>(rows ? r : c);
                ++n;
            }
    return sum / static_cast<double>(n);
}

std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) return {1.0};
    const int half = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * half + 1);
    double total = 0.0;
    for (int i = -half; i <= half; ++i) total += k[i + half] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= total;
    return k;
}

// Separable blur normalised over the cone so the sector edge does not darken.
std::vector<double> masked_blur(const std::vector<double>& v, const std::vector<std::uint8_t>& inside, std::size_t rows,
                                std::size_t cols, double sigma) {
    const auto k = gaussian_kernel(sigma);
    const int half = static_cast<int>(k.size() / 2);
    std::vector<double> num(v.size()), den(v.size()), tn(v.size()), td(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        num[i] = inside[i] ? v[i] : 0.0;
        den[i] = inside[i] ? 1.0 : 0.0;
    }
    auto pass = [&](const std::vector<double>& in_n, const std::vector<double>& in_d, std::vector<double>& out_n,
                    std::vector<double>& out_d, bool horizontal) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                double sn = 0.0, sd = 0.0;
                for (int j = -half; j <= half; ++j) {
                    const long rr = static_cast<long>(r) + (horizontal ? 0 : j);
                    const long cc = static_cast<long>(c) + (horizontal ? j : 0);
                    if (rr < 0 || cc < 0 || rr >= static_cast<long>(rows) || cc >= static_cast<long>(cols)) continue;
                    const std::size_t idx = static_cast<std::size_t>(rr) * cols + static_cast<std::size_t>(cc);
                    sn += k[j + half] * in_n[idx];
                    sd += k[j + half] * in_d[idx];
                }
                out_n[r * cols + c] = sn;
                out_d[r * cols + c] = sd;
            }
    };
    pass(num, den, tn, td, true);
    pass(tn, td, num, den, false);
    std::vector<double> out(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (inside[i] && den[i] > 0.0) out[i] = num[i] / den[i];
    return out;
}

}  // namespace

double sector_area(const ConeParams& p) {
    return p.width_deg / 360.0 * std::numbers::pi * (p.outer_radius * p.outer_radius - p.inner_radius * p.inner_radius);
}

Cone make_cone(const ConeParams& p) {
    if (!(p.width_deg > 0.0 && p.width_deg < 180.0)) throw std::invalid_argument("cone width must lie in (0, 180) degrees");
    if (!(p.inner_radius >= 0.0 && p.inner_radius < p.outer_radius))
        throw std::invalid_argument("cone radii must satisfy 0 <= inner < outer");
    if (p.rows == 0 || p.cols == 0) throw std::invalid_argument("cone image must be non-empty");
    Cone cone{p, Mask2D(p.rows, p.cols)};
    for (std::size_t r = 0; r < p.rows; ++r)
        for (std::size_t c = 0; c < p.cols; ++c)
            cone.mask.at(r, c) = in_sector(p, static_cast<double>(r), static_cast<double>(c)) ? 1 : 0;
    return cone;
}

Mask2D Layout::organ_mask() const {
    Mask2D m(rows, cols);
    for (std::size_t i = 0; i < cls.size(); ++i) m.px[i] = cls[i] == static_cast<std::uint8_t>(LayoutClass::Organ);
    return m;
}

Mask2D Layout::cone_mask() const {
    Mask2D m(rows, cols);
    for (std::size_t i = 0; i < cls.size(); ++i) m.px[i] = cls[i] != static_cast<std::uint8_t>(LayoutClass::Outside);
    return m;
}

std::size_t Layout::count(LayoutClass c) const {
    return static_cast<std::size_t>(std::count(cls.begin(), cls.end(), static_cast<std::uint8_t>(c)));
}

Placement default_placement(const ConeParams& cone) {
    return {cone.apex_row + (cone.inner_radius + cone.outer_radius) / 2.0, cone.apex_col, true};
}

Layout compose_layout(const Mask2D& slice, const Cone& cone, const Placement& placement) {
    Layout out{cone.mask.rows, cone.mask.cols, std::vector<std::uint8_t>(cone.mask.px.size()), cone.params};
    for (std::size_t i = 0; i < out.cls.size(); ++i)
        out.cls[i] = static_cast<std::uint8_t>(cone.mask.px[i] ? LayoutClass::Cone : LayoutClass::Outside);
    if (slice.empty()) return out;

    const Mask2D organ = placement.quarter_turn ? phantom::rotate90_ccw(slice) : slice;
    const long dr = std::lround(placement.centre_row - centroid_axis(organ, true));
    const long dc = std::lround(placement.centre_col - centroid_axis(organ, false));
    std::size_t outside = 0;
    std::vector<std::size_t> hits;
    for (std::size_t r = 0; r < organ.rows; ++r)
        for (std::size_t c = 0; c < organ.cols; ++c) {
            if (!organ.at(r, c)) continue;
            const long rr = static_cast<long>(r) + dr, cc = static_cast<long>(c) + dc;
            if (rr < 0 || cc < 0 || rr >= static_cast<long>(out.rows) || cc >= static_cast<long>(out.cols)) {
                ++outside;
                continue;
            }
            const std::size_t idx = static_cast<std::size_t>(rr) * out.cols + static_cast<std::size_t>(cc);
            if (!cone.mask.px[idx]) ++outside;
            else hits.push_back(idx);
        }
    if (outside > 0)
        throw OrganOutsideCone(std::to_string(outside) + " organ pixels fall outside the cone interior", outside);
    for (std::size_t idx : hits) out.cls[idx] = static_cast<std::uint8_t>(LayoutClass::Organ);
    return out;
}

Layout compose_layout_fitted(const Mask2D& slice, const Cone& cone) {
    const Placement base = default_placement(cone.params);
    std::size_t best = static_cast<std::size_t>(-1);
    for (int step = 0; step <= 40; ++step) {
        const double shift = (step % 2 ? 1.0 : -1.0) * static_cast<double>((step + 1) / 2);
        Placement p = base;
        p.centre_row += shift;
        try {
            return compose_layout(slice, cone, p);
        } catch (const OrganOutsideCone& e) {
            best = std::min(best, e.outside_pixels);
        }
    }
    throw OrganOutsideCone("organ does not fit the cone at any depth; best placement leaves " + std::to_string(best) +
                               " pixels outside",
                           best);
}

PseudoUSImage render_pseudo_us(const Layout& layout, std::uint64_t seed, const RenderParams& params) {
    PseudoUSImage img{layout.rows, layout.cols, std::vector<double>(layout.cls.size(), 0.0), seed, params};
    Rng rng(derive_seed(seed, "speckle"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double rayleigh_scale = std::sqrt(2.0 / std::numbers::pi);  // unit-mean Rayleigh
    std::vector<std::uint8_t> inside(layout.cls.size());
    std::vector<double> v(layout.cls.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double u = unif(rng);  // drawn for every pixel so the stream does not depend on the layout
        const auto c = static_cast<LayoutClass>(layout.cls[i]);
        inside[i] = c != LayoutClass::Outside;
        if (!inside[i]) continue;
        const double speckle = rayleigh_scale * std::sqrt(-2.0 * std::log1p(-u));
        const double base = c == LayoutClass::Organ ? params.organ_intensity : params.tissue_intensity;
        v[i] = base * std::max(0.0, 1.0 + params.speckle_scale * (speckle - 1.0));
    }
    v = masked_blur(v, inside, layout.rows, layout.cols, params.blur_sigma_px);
    const auto& cp = layout.cone;
    for (std::size_t r = 0; r < layout.rows; ++r)
        for (std::size_t c = 0; c < layout.cols; ++c) {
            const std::size_t i = r * layout.cols + c;
            if (!inside[i]) continue;
            const double depth = std::hypot(static_cast<double>(r) - cp.apex_row, static_cast<double>(c) - cp.apex_col);
            img.intensity[i] = std::clamp(v[i] * std::exp(-params.attenuation * depth / cp.outer_radius), 0.0, 1.0);
        }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Gray8& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PgmError("cannot open " + path.string() + " for writing");
    out << "P5\n" << image.cols << ' ' << image.rows << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.px.data()), static_cast<std::streamsize>(image.px.size()));
    if (!out) throw PgmError("write failed: " + path.string());
}

Gray8 read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PgmError("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw PgmError(path.string() + ": not a binary PGM");
    auto next_int = [&]() {
        in >> std::ws;
        while (in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            in >> std::ws;
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) throw PgmError(path.string() + ": malformed header");
        return v;
    };
    Gray8 g;
    g.cols = static_cast<std::size_t>(next_int());
    g.rows = static_cast<std::size_t>(next_int());
    if (next_int() != 255) throw PgmError(path.string() + ": only 8-bit PGM is supported");
    in.get();
    g.px.resize(g.rows * g.cols);
    in.read(reinterpret_cast<char*>(g.px.data()), static_cast<std::streamsize>(g.px.size()));
    if (in.gcount() != static_cast<std::streamsize>(g.px.size())) throw PgmError(path.string() + ": truncated data");
    return g;
}

Gray8 to_gray(const PseudoUSImage& image) {
    Gray8 g{image.rows, image.cols, std::vector<std::uint8_t>(image.intensity.size())};
    for (std::size_t i = 0; i < g.px.size(); ++i)
        g.px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.intensity[i], 0.0, 1.0) * 255.0));
    return g;
}

Gray8 to_gray(const Layout& layout) {
    static constexpr std::uint8_t codes[3] = {0, 128, 255};
    Gray8 g{layout.rows, layout.cols, std::vector<std::uint8_t>(layout.cls.size())};
    for (std::size_t i = 0; i < g.px.size(); ++i) g.px[i] = codes[layout.cls[i]];
    return g;
}

Gray8 to_gray(const Mask2D& mask) {
    Gray8 g{mask.rows, mask.cols, std::vector<std::uint8_t>(mask.px.size())};
    for (std::size_t i = 0; i < g.px.size(); ++i) g.px[i] = mask.px[i] ? 255 : 0;
    return g;
}

}  // namespace spv::ussim
