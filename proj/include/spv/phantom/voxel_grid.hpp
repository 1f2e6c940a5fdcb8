#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace spv::phantom {

using Dims = std::array<std::size_t, 3>;
using Spacing = std::array<double, 3>;

/// Binary occupancy on a regular grid. Axis 0 is left-right (x), axis 1
/// anterior-posterior (y), axis 2 inferior-superior (z); storage is
/// row-major with z fastest.
class VoxelGrid {
public:
    VoxelGrid() = default;
    VoxelGrid(Dims dims, Spacing spacing_mm);

    const Dims& dims() const { return dims_; }
    const Spacing& spacing() const { return spacing_; }
    std::size_t size() const { return voxels_.size(); }

    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (x * dims_[1] + y) * dims_[2] + z; }
    bool at(std::size_t x, std::size_t y, std::size_t z) const { return voxels_[index(x, y, z)] != 0; }
    void set(std::size_t x, std::size_t y, std::size_t z, bool v) { voxels_[index(x, y, z)] = v ? 1 : 0; }
    bool in_bounds(long x, long y, long z) const;

    const std::vector<std::uint8_t>& voxels() const { return voxels_; }
    std::vector<std::uint8_t>& voxels() { return voxels_; }

    std::size_t count() const;
    bool operator==(const VoxelGrid&) const = default;

private:
    Dims dims_{0, 0, 0};
    Spacing spacing_{1.0, 1.0, 1.0};
    std::vector<std::uint8_t> voxels_;
};

/// Inclusive index bounds of the occupied voxels.
struct BoundingBox {
    std::array<std::size_t, 3> lo;
    std::array<std::size_t, 3> hi;
    std::size_t extent(int axis) const { return hi[axis] - lo[axis] + 1; }
};

/// Throws std::invalid_argument for an empty grid.
BoundingBox bounding_box(const VoxelGrid& grid);

/// Occupied voxel count times voxel size, in millilitres.
double voxel_volume(const VoxelGrid& grid);

class GridFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Little-endian "SPVG" file: magic, u16 version, 3 x u32 dims, 3 x f32
/// spacing (mm), then occupancy bit-packed row-major (MSB first).
void write_grid(const std::filesystem::path& path, const VoxelGrid& grid);
VoxelGrid read_grid(const std::filesystem::path& path);

}  // namespace spv::phantom
