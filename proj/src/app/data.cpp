#include "spv/app/data.hpp"

#include <random>

namespace spv::app {

Mask2D model_slice(const VoxelGrid& grid, SliceAxis axis, std::size_t size) {
    return phantom::center_on_centroid(phantom::extract_max_area_slice(grid, axis, size).image);
}

Tensor to_input(const Mask2D& coronal, const Mask2D* transverse) {
    const std::size_t s = coronal.rows;
    if (coronal.cols != s || (transverse && (transverse->rows != s || transverse->cols != s)))
        throw std::invalid_argument("to_input: slices must be square and equally sized");
    Tensor t({transverse ? std::size_t{2} : std::size_t{1}, s, s});
    for (std::size_t k = 0; k < s * s; ++k) t[k] = coronal.px[k] ? 1.0 : 0.0;
    if (transverse)
        for (std::size_t k = 0; k < s * s; ++k) t[s * s + k] = transverse->px[k] ? 1.0 : 0.0;
    return t;
}

Tensor to_input(const VoxelGrid& grid, vae::ViewMode views, std::size_t size) {
    const Mask2D cor = model_slice(grid, SliceAxis::Coronal, size);
    if (views == vae::ViewMode::Single) return to_input(cor, nullptr);
    const Mask2D tra = model_slice(grid, SliceAxis::Transverse, size);
    return to_input(cor, &tra);
}

Mask2D channel_mask(const Tensor& t, std::size_t c) {
    const std::size_t s = t.dim(1);
    Mask2D m(s, t.dim(2));
    for (std::size_t k = 0; k < m.px.size(); ++k) m.px[k] = t[c * s * m.cols + k] > 0.5 ? 1 : 0;
    return m;
}

std::vector<Tensor> augmentation_bank(const VoxelGrid& grid, vae::ViewMode views, std::size_t size,
                                      const AugmentConfig& cfg, std::uint64_t seed) {
    std::vector<Tensor> out{to_input(grid, views, size)};
    Rng rng(derive_seed(seed, "augment.angles"));
    std::uniform_real_distribution<double> angle(-cfg.max_angle_deg, cfg.max_angle_deg);
    for (std::size_t v = 1; v < cfg.variants; ++v) {
        const double ax = angle(rng), ay = angle(rng), az = angle(rng);
        out.push_back(to_input(phantom::rotate_grid(grid, {ax, ay, az}), views, size));
    }
    return out;
}

}  // namespace spv::app
