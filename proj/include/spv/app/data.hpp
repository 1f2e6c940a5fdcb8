#pragma once

#include <cstdint>
#include <vector>

#include "spv/grad/tensor.hpp"
#include "spv/phantom/dataset.hpp"
#include "spv/vae/vae.hpp"

namespace spv::app {

using grad::Tensor;
using phantom::Mask2D;
using phantom::SliceAxis;
using phantom::VoxelGrid;

/// Largest-area slice resampled so the grid's field of view spans `size`
/// pixels, then shifted so its centroid sits at the frame centre.
Mask2D model_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t size);

/// [C, S, S] model input: coronal, plus transverse in dual mode.
Tensor to_input(const Mask2D& coronal, const Mask2D* transverse);
Tensor to_input(const VoxelGrid& grid, vae::ViewMode views, std::size_t size);

/// Channel `c` of a [C, S, S] tensor thresholded at 0.5.
Mask2D channel_mask(const Tensor& t, std::size_t c);

struct AugmentConfig {
    std::size_t variants = 6;       // including the unrotated variant 0
    double max_angle_deg = 15.0;    // uniform per axis
};

/// Variant 0 is the unrotated input; the others come from random rotations
/// of the 3D grid about its centroid before slicing.
std::vector<Tensor> augmentation_bank(const VoxelGrid& grid, vae::ViewMode views, std::size_t size,
                                      const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace spv::app
