#pragma once

#include <array>
#include <string>
#include <vector>

namespace spv::analysis {

using Vec = std::vector<double>;

struct LatentMap {
    std::vector<std::array<double, 2>> coords;  // mean-centred projections
    std::array<Vec, 2> components;              // orthonormal, length D
    Vec mean;                                   // length D
    std::array<double, 2> explained_variance{};  // covariance eigenvalues (n - 1 normalisation)
    double explained_ratio = 0.0;                // share of total variance in the two components
};

/// Top-2 principal components of the latent means. Component signs are
/// fixed so the largest-magnitude entry is positive.
LatentMap pca_map(const std::vector<Vec>& mus);

/// Flips PC1 (components and coordinates) so it correlates non-negatively
/// with `volumes`; returns the resulting correlation.
double orient_pc1(LatentMap& map, const std::vector<double>& volumes);

/// |pearson(pc1, volumes)|.
double pc1_volume_correlation(const LatentMap& map, const std::vector<double>& volumes);

/// k latent vectors evenly spaced from the minimum to the maximum PC1
/// projection, lifted back through the mean and PC1 (PC2 coordinate 0).
std::vector<Vec> principal_axis_latents(const LatentMap& map, std::size_t k = 5);

struct LatentPoint {
    std::string id;
    double pc1 = 0.0;
    double pc2 = 0.0;
    double volume_ml = 0.0;
    bool splenomegaly = false;
};

std::string latent_csv(const std::vector<LatentPoint>& points);

/// Scatter with a blue-to-red volume colour scale; dots for normal cases,
/// crosses for splenomegaly.
std::string latent_svg(const std::vector<LatentPoint>& points, const std::string& title);

}  // namespace spv::analysis
