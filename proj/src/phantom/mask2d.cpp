#include "spv/phantom/mask2d.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spv::phantom {

namespace {

// round(sum / n) using integer arithmetic so integer translations of the
// input shift the result by exactly the same amount.
long rounded_mean(long long sum, long long n) {
    const long long num = 2 * sum + n;
    const long long den = 2 * n;
    long long q = num / den;
    if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
    return static_cast<long>(q);
}

}  // namespace

std::size_t Mask2D::count() const { return static_cast<std::size_t>(std::count(px.begin(), px.end(), std::uint8_t{1})); }

Mask2D center_in_frame(const Mask2D& mask, std::size_t rows, std::size_t cols) {
    long long sr = 0, sc = 0, n = 0;
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c)
            if (mask.at(r, c)) {
                sr += static_cast<long long>(r);
                sc += static_cast<long long>(c);
                ++n;
            }
    Mask2D out(rows, cols, mask.spacing_mm);
    if (n == 0) return out;
    const long dr = static_cast<long>(rows / 2) - rounded_mean(sr, n);
    const long dc = static_cast<long>(cols / 2) - rounded_mean(sc, n);
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            const long nr = static_cast<long>(r) + dr, nc = static_cast<long>(c) + dc;
            if (nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols)) {
                throw std::invalid_argument("center_in_frame: shape does not fit a " + std::to_string(rows) + "x" +
                                            std::to_string(cols) + " frame");
            }
            out.at(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)) = 1;
        }
    return out;
}

Mask2D center_on_centroid(const Mask2D& mask) { return center_in_frame(mask, mask.rows, mask.cols); }

Mask2D rotate90_ccw(const Mask2D& mask) {
    // (r, c) -> (cols-1-c, r)
    Mask2D out(mask.cols, mask.rows, mask.spacing_mm);
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c) out.at(mask.cols - 1 - c, r) = mask.at(r, c);
    return out;
}

Mask2D rotate90_cw(const Mask2D& mask) {
    // (r, c) -> (c, rows-1-r)
    Mask2D out(mask.cols, mask.rows, mask.spacing_mm);
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c) out.at(c, mask.rows - 1 - r) = mask.at(r, c);
    return out;
}

Mask2D rotate_in_plane(const Mask2D& mask, double degrees) {
    if (degrees == 0.0) return mask;
    const double t = degrees * std::numbers::pi / 180.0;
    const double ct = std::cos(t), st = std::sin(t);
    const double cr = (static_cast<double>(mask.rows) - 1.0) / 2.0;
    const double cc = (static_cast<double>(mask.cols) - 1.0) / 2.0;
    Mask2D out(mask.rows, mask.cols, mask.spacing_mm);
    for (std::size_t r = 0; r < mask.rows; ++r)
        for (std::size_t c = 0; c < mask.cols; ++c) {
            // display coordinates: u right, v up (v = -row)
            const double u = static_cast<double>(c) - cc;
            const double v = cr - static_cast<double>(r);
            // inverse rotation finds the source sample
            const double su = ct * u + st * v;
            const double sv = -st * u + ct * v;
            const long sc = std::lround(su + cc);
            const long sr = std::lround(cr - sv);
            if (sr >= 0 && sc >= 0 && sr < static_cast<long>(mask.rows) && sc < static_cast<long>(mask.cols)) {
                out.at(r, c) = mask.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
            }
        }
    return out;
}

}  // namespace spv::phantom
