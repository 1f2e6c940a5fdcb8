#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

#include "spv/phantom/mask2d.hpp"
#include "spv/phantom/voxel_grid.hpp"

namespace spv::phantom {

/// Deformed ellipsoid. The long semi-axis `a` runs inferior-superior (z),
/// `b` left-right (x) and `c` anterior-posterior (y) before the pose
/// rotation is applied.
struct PhantomSpec {
    double a = 30.0;
    double b = 20.0;
    double c = 15.0;
    double deform_amplitude = 0.0;  // fraction of the local radius, [0, 0.3]
    int harmonic_order = 3;         // highest spherical-harmonic degree used
    std::array<double, 3> pose_deg{0.0, 0.0, 0.0};
    std::uint64_t seed = 0;
};

struct GridGeometry {
    Dims dims{96, 96, 96};
    Spacing spacing{2.0, 2.0, 2.0};
};

class GridTooSmall : public std::runtime_error {
public:
    GridTooSmall(const std::string& what, std::size_t required) : std::runtime_error(what), required_extent(required) {}
    std::size_t required_extent;
};

/// Rasterises the phantom centred in the grid. Throws std::invalid_argument
/// for specs outside their invariants and GridTooSmall when the shape's
/// bounding sphere does not fit.
VoxelGrid generate_phantom(const PhantomSpec& spec, const GridGeometry& geometry);

/// Radial perturbation factor 1 + amplitude * p(direction) on the unit
/// sphere; exposed for analytic checks.
double surface_radius_factor(const PhantomSpec& spec, double ux, double uy, double uz);

/// Rotation about the occupancy centroid by (x, y, z) angles in degrees,
/// applied x first; nearest-neighbour resampling. |angle| <= 45 per axis.
VoxelGrid rotate_grid(const VoxelGrid& grid, const std::array<double, 3>& angles_deg);

/// Integer translation putting the centroid at the centre index of a grid
/// with `target` dims. Occupancy is preserved exactly or an error is thrown.
VoxelGrid centroid_crop_pad(const VoxelGrid& grid, const Dims& target);

enum class SliceAxis { Coronal, Transverse };

const char* to_string(SliceAxis axis);

/// Coronal slices fix y and show z (superior at row 0) by x; transverse
/// slices fix z and show y by x.
Mask2D grid_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t index);

struct SliceSelection {
    std::size_t index = 0;      // slice index along the fixed axis
    std::size_t area_px = 0;    // occupied pixels on the native slice
    Mask2D native;              // native-resolution slice
    Mask2D image;               // resampled to the requested input size
};

/// Picks the slice with the largest occupied area (lowest index on ties) and
/// resamples it so the grid's full field of view spans `out_size` pixels.
/// out_size == 0 keeps the native slice. Throws on an empty grid.
SliceSelection extract_max_area_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t out_size);

/// Area-coverage resampling of a binary mask into an out_size square frame
/// covering the same field of view (pixel kept when >= half covered).
Mask2D resample_square(const Mask2D& mask, std::size_t out_size);

struct Measurements {
    double length_cm = 0.0;     // transverse slices containing the shape x slice spacing
    double width_cm = 0.0;      // largest in-plane diameter on any transverse slice
    double thickness_cm = 0.0;  // extent perpendicular to the width diameter at its midpoint
};

Measurements measure_length_width_thickness(const VoxelGrid& grid);

}  // namespace spv::phantom
