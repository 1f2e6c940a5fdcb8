#include "spv/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "spv/common/rng.hpp"

namespace spv::phantom {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation_xyz(const std::array<double, 3>& deg) {
    const double k = std::numbers::pi / 180.0;
    const double cx = std::cos(deg[0] * k), sx = std::sin(deg[0] * k);
    const double cy = std::cos(deg[1] * k), sy = std::sin(deg[1] * k);
    const double cz = std::cos(deg[2] * k), sz = std::sin(deg[2] * k);
    // Rz * Ry * Rx
    return {{{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
             {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
             {-sy, cy * sx, cy * cx}}};
}

std::array<double, 3> mat_apply(const Mat3& m, const std::array<double, 3>& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

std::array<double, 3> mat_apply_transposed(const Mat3& m, const std::array<double, 3>& v) {
    return {m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2], m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
            m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2]};
}

/// Random real spherical-harmonic combination of degrees 1..order, scaled so
/// its maximum magnitude over a dense direction sample is one.
class HarmonicField {
public:
    HarmonicField(int order, std::uint64_t seed) : order_(order) {
        if (order_ < 1) return;
        Rng rng(derive_seed(seed, "harmonics"));
        std::normal_distribution<double> n01;
        for (int l = 1; l <= order_; ++l)
            for (int m = 0; m <= l; ++m) {
                terms_.push_back({l, m, false, n01(rng)});
                if (m > 0) terms_.push_back({l, m, true, n01(rng)});
            }
        // Fibonacci sphere sample for the normalisation constant.
        constexpr int kSamples = 4096;
        double peak = 0.0;
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < kSamples; ++i) {
            const double z = 1.0 - 2.0 * (i + 0.5) / kSamples;
            const double r = std::sqrt(1.0 - z * z);
            const double phi = golden * i;
            peak = std::max(peak, std::abs(raw(r * std::cos(phi), r * std::sin(phi), z)));
        }
        scale_ = peak > 0.0 ? 1.0 / peak : 0.0;
    }

    double operator()(double ux, double uy, double uz) const {
        if (terms_.empty()) return 0.0;
        return scale_ * raw(ux, uy, uz);
    }

private:
    struct Term {
        int l, m;
        bool sine;
        double coef;
    };

    double raw(double ux, double uy, double uz) const {
        const double ct = std::clamp(uz, -1.0, 1.0);
        const double phi = std::atan2(uy, ux);
        double acc = 0.0;
        for (const auto& t : terms_) {
            const double leg = std::assoc_legendre(static_cast<unsigned>(t.l), static_cast<unsigned>(t.m), ct);
            const double ang = t.sine ? std::sin(t.m * phi) : std::cos(t.m * phi);
            acc += t.coef * leg * ang;
        }
        return acc;
    }

    int order_;
    std::vector<Term> terms_;
    double scale_ = 0.0;
};

void validate(const PhantomSpec& spec, const GridGeometry& geo) {
    const double smax = std::max({geo.spacing[0], geo.spacing[1], geo.spacing[2]});
    if (std::min({spec.a, spec.b, spec.c}) < 5.0 * smax) {
        throw std::invalid_argument("phantom semi-axes must be at least 5x the voxel spacing (" +
                                    std::to_string(5.0 * smax) + " mm)");
    }
    if (!(spec.deform_amplitude >= 0.0 && spec.deform_amplitude <= 0.3)) {
        throw std::invalid_argument("deformation amplitude must lie in [0, 0.3]");
    }
    if (spec.harmonic_order < 0 || spec.harmonic_order > 6) {
        throw std::invalid_argument("harmonic order must lie in [0, 6]");
    }
}

constexpr std::array<double, 3> kCentreOffset{0.23, 0.37, 0.11};

}  // namespace

double surface_radius_factor(const PhantomSpec& spec, double ux, double uy, double uz) {
    if (spec.deform_amplitude == 0.0) return 1.0;
    HarmonicField field(spec.harmonic_order, spec.seed);
    return 1.0 + spec.deform_amplitude * field(ux, uy, uz);
}

VoxelGrid generate_phantom(const PhantomSpec& spec, const GridGeometry& geo) {
    validate(spec, geo);
    const double amp = spec.deform_amplitude;
    const double bound = std::max({spec.a, spec.b, spec.c}) * (1.0 + amp);
    for (int ax = 0; ax < 3; ++ax) {
        const auto required = static_cast<std::size_t>(std::ceil(2.0 * bound / geo.spacing[ax])) + 2;
        if (required > geo.dims[ax]) {
            throw GridTooSmall("phantom needs an extent of " + std::to_string(required) + " voxels along axis " +
                                   std::to_string(ax) + ", grid has " + std::to_string(geo.dims[ax]),
                               required);
        }
    }

    const HarmonicField field(amp > 0.0 ? spec.harmonic_order : 0, spec.seed);
    const Mat3 pose = rotation_xyz(spec.pose_deg);
    VoxelGrid grid(geo.dims, geo.spacing);

    std::array<std::size_t, 3> lo{}, hi{};
    std::array<double, 3> centre{};
    for (int ax = 0; ax < 3; ++ax) {
        // an asymmetric sub-voxel offset keeps lattice symmetry from biasing small volumes
        centre[ax] = (static_cast<double>(geo.dims[ax]) - 1.0) / 2.0 + kCentreOffset[ax];
        const double r = bound / geo.spacing[ax] + 1.0;
        lo[ax] = static_cast<std::size_t>(std::max(0.0, std::floor(centre[ax] - r)));
        hi[ax] = static_cast<std::size_t>(std::min(static_cast<double>(geo.dims[ax] - 1), std::ceil(centre[ax] + r)));
    }
    for (std::size_t x = lo[0]; x <= hi[0]; ++x)
        for (std::size_t y = lo[1]; y <= hi[1]; ++y)
            for (std::size_t z = lo[2]; z <= hi[2]; ++z) {
                const std::array<double, 3> p{(static_cast<double>(x) - centre[0]) * geo.spacing[0],
                                              (static_cast<double>(y) - centre[1]) * geo.spacing[1],
                                              (static_cast<double>(z) - centre[2]) * geo.spacing[2]};
                const auto body = mat_apply_transposed(pose, p);
                const double qx = body[0] / spec.b, qy = body[1] / spec.c, qz = body[2] / spec.a;
                const double rho = std::sqrt(qx * qx + qy * qy + qz * qz);
                bool inside;
                if (rho <= 1.0 - amp) inside = true;
                else if (rho > 1.0 + amp) inside = false;
                else inside = rho <= 1.0 + amp * field(qx / rho, qy / rho, qz / rho);
                if (inside) grid.set(x, y, z, true);
            }
    return grid;
}

VoxelGrid rotate_grid(const VoxelGrid& grid, const std::array<double, 3>& angles_deg) {
    for (double a : angles_deg)
        if (std::abs(a) > 45.0) throw std::invalid_argument("rotate_grid: angles are limited to +/-45 degrees");
    if (angles_deg == std::array<double, 3>{0.0, 0.0, 0.0}) return grid;
    const auto& d = grid.dims();
    const auto& s = grid.spacing();
    VoxelGrid out(d, s);
    if (grid.count() == 0) return out;

    std::array<double, 3> sum{0, 0, 0};
    std::size_t n = 0;
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t z = 0; z < d[2]; ++z)
                if (grid.at(x, y, z)) {
                    sum[0] += static_cast<double>(x);
                    sum[1] += static_cast<double>(y);
                    sum[2] += static_cast<double>(z);
                    ++n;
                }
    std::array<double, 3> c{};
    for (int a = 0; a < 3; ++a) c[a] = sum[a] / static_cast<double>(n) * s[a];

    const Mat3 rot = rotation_xyz(angles_deg);
    const BoundingBox box = bounding_box(grid);
    std::array<double, 3> olo{1e300, 1e300, 1e300}, ohi{-1e300, -1e300, -1e300};
    for (int corner = 0; corner < 8; ++corner) {
        std::array<double, 3> p{};
        for (int a = 0; a < 3; ++a) {
            const double idx = (corner >> a & 1) ? box.hi[a] + 0.5 : box.lo[a] - 0.5;
            p[a] = idx * s[a] - c[a];
        }
        const auto q = mat_apply(rot, p);
        for (int a = 0; a < 3; ++a) {
            olo[a] = std::min(olo[a], (q[a] + c[a]) / s[a]);
            ohi[a] = std::max(ohi[a], (q[a] + c[a]) / s[a]);
        }
    }
    std::array<std::size_t, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<std::size_t>(std::clamp(std::floor(olo[a]) - 1.0, 0.0, static_cast<double>(d[a] - 1)));
        hi[a] = static_cast<std::size_t>(std::clamp(std::ceil(ohi[a]) + 1.0, 0.0, static_cast<double>(d[a] - 1)));
    }
    for (std::size_t x = lo[0]; x <= hi[0]; ++x)
        for (std::size_t y = lo[1]; y <= hi[1]; ++y)
            for (std::size_t z = lo[2]; z <= hi[2]; ++z) {
                const std::array<double, 3> p{static_cast<double>(x) * s[0] - c[0], static_cast<double>(y) * s[1] - c[1],
                                              static_cast<double>(z) * s[2] - c[2]};
                const auto q = mat_apply_transposed(rot, p);
                const long sx = std::lround((q[0] + c[0]) / s[0]);
                const long sy = std::lround((q[1] + c[1]) / s[1]);
                const long sz = std::lround((q[2] + c[2]) / s[2]);
                if (grid.in_bounds(sx, sy, sz) &&
                    grid.at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy), static_cast<std::size_t>(sz))) {
                    out.set(x, y, z, true);
                }
            }
    return out;
}

VoxelGrid centroid_crop_pad(const VoxelGrid& grid, const Dims& target) {
    const auto& d = grid.dims();
    std::array<long long, 3> sum{0, 0, 0};
    long long n = 0;
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t z = 0; z < d[2]; ++z)
                if (grid.at(x, y, z)) {
                    sum[0] += static_cast<long long>(x);
                    sum[1] += static_cast<long long>(y);
                    sum[2] += static_cast<long long>(z);
                    ++n;
                }
    VoxelGrid out(target, grid.spacing());
    if (n == 0) return out;
    const BoundingBox box = bounding_box(grid);
    std::array<long, 3> shift{};
    for (int a = 0; a < 3; ++a) {
        const long long num = 2 * sum[a] + n;
        const long rounded = static_cast<long>(num / (2 * n));
        shift[a] = static_cast<long>(target[a] / 2) - rounded;
        const long lo = static_cast<long>(box.lo[a]) + shift[a];
        const long hi = static_cast<long>(box.hi[a]) + shift[a];
        if (lo < 0 || hi >= static_cast<long>(target[a])) {
            throw std::invalid_argument("centroid_crop_pad: bounding box extent " + std::to_string(box.extent(a)) +
                                        " does not fit target extent " + std::to_string(target[a]) + " on axis " +
                                        std::to_string(a));
        }
    }
    for (std::size_t x = box.lo[0]; x <= box.hi[0]; ++x)
        for (std::size_t y = box.lo[1]; y <= box.hi[1]; ++y)
            for (std::size_t z = box.lo[2]; z <= box.hi[2]; ++z)
                if (grid.at(x, y, z)) {
                    out.set(static_cast<std::size_t>(static_cast<long>(x) + shift[0]),
                            static_cast<std::size_t>(static_cast<long>(y) + shift[1]),
                            static_cast<std::size_t>(static_cast<long>(z) + shift[2]), true);
                }
    return out;
}

const char* to_string(SliceAxis axis) { return axis == SliceAxis::Coronal ? "coronal" : "transverse"; }

Mask2D grid_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t index) {
    const auto& d = grid.dims();
    if (axis == SliceAxis::Coronal) {
        if (index >= d[1]) throw std::out_of_range("coronal slice index out of range");
        Mask2D m(d[2], d[0], grid.spacing()[0]);
        for (std::size_t x = 0; x < d[0]; ++x)
            for (std::size_t z = 0; z < d[2]; ++z) m.at(d[2] - 1 - z, x) = grid.at(x, index, z) ? 1 : 0;
        return m;
    }
    if (index >= d[2]) throw std::out_of_range("transverse slice index out of range");
    Mask2D m(d[1], d[0], grid.spacing()[0]);
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y) m.at(y, x) = grid.at(x, y, index) ? 1 : 0;
    return m;
}

Mask2D resample_square(const Mask2D& mask, std::size_t out_size) {
    const std::size_t native = std::max(mask.rows, mask.cols);
    if (out_size >= native) return center_in_frame(mask, out_size, out_size);

    // Source pixels per output pixel; the mask is centred in a native x native field.
    const double f = static_cast<double>(native) / static_cast<double>(out_size);
    const double off_r = (static_cast<double>(native) - static_cast<double>(mask.rows)) / 2.0;
    const double off_c = (static_cast<double>(native) - static_cast<double>(mask.cols)) / 2.0;
    Mask2D out(out_size, out_size, mask.spacing_mm * f);

    // Overlap of output interval i with each source index, per axis.
    auto weights = [&](std::size_t i, double off, std::size_t n) {
        std::vector<std::pair<std::size_t, double>> w;
        const double a = static_cast<double>(i) * f - off, b = a + f;
        const long first = static_cast<long>(std::floor(a)), last = static_cast<long>(std::ceil(b));
        for (long k = first; k < last; ++k) {
            if (k < 0 || k >= static_cast<long>(n)) continue;
            const double ov = std::min(b, static_cast<double>(k + 1)) - std::max(a, static_cast<double>(k));
            if (ov > 0.0) w.emplace_back(static_cast<std::size_t>(k), ov);
        }
        return w;
    };
    const double cell = f * f;
    for (std::size_t i = 0; i < out_size; ++i) {
        const auto wr = weights(i, off_r, mask.rows);
        for (std::size_t j = 0; j < out_size; ++j) {
            const auto wc = weights(j, off_c, mask.cols);
            double cover = 0.0;
            for (const auto& [r, a] : wr)
                for (const auto& [c, b] : wc)
                    if (mask.at(r, c)) cover += a * b;
            out.at(i, j) = cover >= 0.5 * cell - 1e-12 ? 1 : 0;
        }
    }
    return out;
}

SliceSelection extract_max_area_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t out_size) {
    const auto& d = grid.dims();
    const int fixed = axis == SliceAxis::Coronal ? 1 : 2;
    std::vector<std::size_t> area(d[fixed], 0);
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y)
            for (std::size_t z = 0; z < d[2]; ++z)
                if (grid.at(x, y, z)) ++area[fixed == 1 ? y : z];
    std::size_t best = 0;
    for (std::size_t i = 1; i < area.size(); ++i)
        if (area[i] > area[best]) best = i;
    if (area.empty() || area[best] == 0) throw std::invalid_argument("extract_max_area_slice: grid is empty");

    SliceSelection sel;
    sel.index = best;
    sel.area_px = area[best];
    sel.native = grid_slice(grid, axis, best);
    sel.image = out_size == 0 ? sel.native : resample_square(sel.native, out_size);
    return sel;
}

Measurements measure_length_width_thickness(const VoxelGrid& grid) {
    const auto& d = grid.dims();
    const auto& s = grid.spacing();
    const double s_plane = std::sqrt(s[0] * s[1]);

    std::size_t slices = 0;
    double best_d2 = -1.0;
    std::size_t best_z = 0;
    std::array<double, 2> best_p{}, best_q{};
    std::vector<std::array<double, 2>> boundary;
    for (std::size_t z = 0; z < d[2]; ++z) {
        boundary.clear();
        for (std::size_t x = 0; x < d[0]; ++x)
            for (std::size_t y = 0; y < d[1]; ++y) {
                if (!grid.at(x, y, z)) continue;
                const bool edge = x == 0 || y == 0 || x + 1 == d[0] || y + 1 == d[1] || !grid.at(x - 1, y, z) ||
                                  !grid.at(x + 1, y, z) || !grid.at(x, y - 1, z) || !grid.at(x, y + 1, z);
                if (edge) boundary.push_back({static_cast<double>(x) * s[0], static_cast<double>(y) * s[1]});
            }
        if (boundary.empty()) continue;
        ++slices;
        for (std::size_t i = 0; i < boundary.size(); ++i)
            for (std::size_t j = i; j < boundary.size(); ++j) {
                const double dx = boundary[i][0] - boundary[j][0], dy = boundary[i][1] - boundary[j][1];
                const double d2 = dx * dx + dy * dy;
                if (d2 > best_d2) {
                    best_d2 = d2;
                    best_z = z;
                    best_p = boundary[i];
                    best_q = boundary[j];
                }
            }
    }
    if (slices == 0) throw std::invalid_argument("measure_length_width_thickness: grid is empty");

    Measurements m;
    m.length_cm = static_cast<double>(slices) * s[2] / 10.0;
    const double dmax = std::sqrt(best_d2);
    m.width_cm = (dmax + s_plane) / 10.0;

    std::array<double, 2> u{1.0, 0.0};
    if (dmax > 0.0) u = {(best_q[0] - best_p[0]) / dmax, (best_q[1] - best_p[1]) / dmax};
    const std::array<double, 2> nrm{-u[1], u[0]};
    const std::array<double, 2> mid{(best_p[0] + best_q[0]) / 2.0, (best_p[1] + best_q[1]) / 2.0};
    double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
    for (std::size_t x = 0; x < d[0]; ++x)
        for (std::size_t y = 0; y < d[1]; ++y) {
            if (!grid.at(x, y, best_z)) continue;
            const double rx = static_cast<double>(x) * s[0] - mid[0], ry = static_cast<double>(y) * s[1] - mid[1];
            if (std::abs(rx * u[0] + ry * u[1]) > s_plane / 2.0) continue;
            const double t = rx * nrm[0] + ry * nrm[1];
            tmin = std::min(tmin, t);
            tmax = std::max(tmax, t);
        }
    m.thickness_cm = tmax >= tmin ? (tmax - tmin + s_plane) / 10.0 : s_plane / 10.0;
    return m;
}

}  // namespace spv::phantom
