#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace spv::phantom {

/// Binary 2D segmentation, row-major. One view of a SliceImage.
struct Mask2D {
    std::size_t rows = 0;
    std::size_t cols = 0;
    double spacing_mm = 1.0;
    std::vector<std::uint8_t> px;

    Mask2D() = default;
    Mask2D(std::size_t r, std::size_t c, double spacing = 1.0) : rows(r), cols(c), spacing_mm(spacing), px(r * c, 0) {}

    std::uint8_t at(std::size_t r, std::size_t c) const { return px[r * cols + c]; }
    std::uint8_t& at(std::size_t r, std::size_t c) { return px[r * cols + c]; }
    std::size_t count() const;
    bool empty() const { return count() == 0; }
    bool operator==(const Mask2D&) const = default;
};

/// Integer shift moving the pixel centroid to (rows/2, cols/2). Throws if
/// any occupied pixel would leave the frame.
Mask2D center_on_centroid(const Mask2D& mask);

/// Place `mask` centred (by centroid) in a frame of the given size; throws
/// when the shape does not fit.
Mask2D center_in_frame(const Mask2D& mask, std::size_t rows, std::size_t cols);

/// 90-degree rotations; anticlockwise as displayed with row 0 at the top.
Mask2D rotate90_ccw(const Mask2D& mask);
Mask2D rotate90_cw(const Mask2D& mask);

/// Nearest-neighbour in-plane rotation about the frame centre, positive
/// angles anticlockwise as displayed. Zero returns an exact copy.
Mask2D rotate_in_plane(const Mask2D& mask, double degrees);

}  // namespace spv::phantom
