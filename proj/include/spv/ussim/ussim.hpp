#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "spv/phantom/mask2d.hpp"

namespace spv::ussim {

using phantom::Mask2D;

/// Annular sector opening downwards from the apex. Coordinates are pixel
/// centres (row, col) with row 0 at the top of the image.
struct ConeParams {
    double apex_row = -4.0;
    double apex_col = 39.5;
    double width_deg = 84.0;
    double inner_radius = 10.0;
    double outer_radius = 86.0;
    std::size_t rows = 80;
    std::size_t cols = 80;
};

struct Cone {
    ConeParams params;
    Mask2D mask;
};

/// Throws std::invalid_argument unless 0 < width < 180 and
/// 0 <= inner < outer, and the image is non-empty.
Cone make_cone(const ConeParams& params);

/// Sector area (width/360) * pi * (outer^2 - inner^2) in pixels.
double sector_area(const ConeParams& params);

enum class LayoutClass : std::uint8_t { Outside = 0, Cone = 1, Organ = 2 };

struct Layout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> cls;  // LayoutClass per pixel
    ConeParams cone;

    Mask2D organ_mask() const;
    Mask2D cone_mask() const;  // cone interior including organ pixels
    std::size_t count(LayoutClass c) const;
};

/// Where the organ's centroid lands in the ultrasound frame, optionally
/// after the anticlockwise quarter turn that maps a coronal slice into the
/// probe's view.
struct Placement {
    double centre_row = 0.0;
    double centre_col = 0.0;
    bool quarter_turn = true;
};

/// Default placement: the cone axis, midway between the radii.
Placement default_placement(const ConeParams& cone);

class OrganOutsideCone : public std::runtime_error {
public:
    OrganOutsideCone(const std::string& what, std::size_t n) : std::runtime_error(what), outside_pixels(n) {}
    std::size_t outside_pixels;
};

/// Draws the slice's organ pixels into the cone. Throws OrganOutsideCone
/// with the number of organ pixels not covered by the cone interior.
Layout compose_layout(const Mask2D& slice, const Cone& cone, const Placement& placement);

/// Tries the default placement, then shifts along the cone axis towards the
/// deeper or shallower end until the organ fits.
Layout compose_layout_fitted(const Mask2D& slice, const Cone& cone);

struct RenderParams {
    double organ_intensity = 0.62;
    double tissue_intensity = 0.36;
    double speckle_scale = 1.0;         // multiplier on the unit-mean Rayleigh speckle spread
    double blur_sigma_px = 1.0;
    double attenuation = 0.5;           // exp(-attenuation * depth / outer_radius)
};

struct PseudoUSImage {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> intensity;  // [0, 1], exactly 0 outside the cone
    std::uint64_t seed = 0;
    RenderParams params;

    double at(std::size_t r, std::size_t c) const { return intensity[r * cols + c]; }
};

PseudoUSImage render_pseudo_us(const Layout& layout, std::uint64_t seed, const RenderParams& params = {});

class PgmError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Gray8 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> px;
};

void write_pgm(const std::filesystem::path& path, const Gray8& image);
Gray8 read_pgm(const std::filesystem::path& path);

Gray8 to_gray(const PseudoUSImage& image);
Gray8 to_gray(const Layout& layout);  // class codes 0 / 128 / 255
Gray8 to_gray(const Mask2D& mask);    // 0 / 255

}  // namespace spv::ussim
