#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "spv/phantom/dataset.hpp"
#include "spv/ussim/ussim.hpp"

using namespace spv::ussim;
using spv::phantom::Mask2D;

namespace {

ConeParams wide_cone(double width, double inner, double outer) {
    ConeParams p;
    p.apex_row = 0.0;
    p.apex_col = 120.0;
    p.width_deg = width;
    p.inner_radius = inner;
    p.outer_radius = outer;
    p.rows = 130;
    p.cols = 241;
    return p;
}

Mask2D disc(std::size_t n, double cr, double cc, double radius) {
    Mask2D m(n, n, 3.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
            if (std::hypot(r - cr, c - cc) <= radius) {
                m.at(r, c) = 1;
            }
    return m;
}

double mean_gap(const Layout& layout, const PseudoUSImage& img) {
    double so = 0, st = 0;
    std::size_t no = 0, nt = 0;
    for (std::size_t i = 0; i < layout.cls.size(); ++i) {
        if (layout.cls[i] == static_cast<std::uint8_t>(LayoutClass::Organ)) so += img.intensity[i], ++no;
        else if (layout.cls[i] == static_cast<std::uint8_t>(LayoutClass::Cone)) st += img.intensity[i], ++nt;
    }
    return so / no - st / nt;
}

}  // namespace

TEST(Cone, SixtyDegreeSectorArea) {
    const auto cone = make_cone(wide_cone(60, 10, 100));
    EXPECT_NEAR(sector_area(cone.params), 5183.6, 0.1);
    EXPECT_LT(std::abs(static_cast<double>(cone.mask.count()) - 5183.6) / 5183.6, 0.02);
}

TEST(Cone, AreaMatchesFormulaAcrossParameters) {
    const double cases[][3] = {{30, 20, 110}, {45, 0, 90}, {90, 15, 80}, {120, 30, 70}, {170, 5, 60}, {75, 40, 120}};
    for (const auto& c : cases) {
        const auto p = wide_cone(c[0], c[1], c[2]);
        const double n = static_cast<double>(make_cone(p).mask.count());
        EXPECT_LT(std::abs(n - sector_area(p)) / sector_area(p), 0.02) << c[0] << " " << c[1] << " " << c[2];
    }
}

TEST(Cone, DegenerateParametersRejected) {
    EXPECT_THROW(make_cone(wide_cone(0, 10, 100)), std::invalid_argument);
    EXPECT_THROW(make_cone(wide_cone(180, 10, 100)), std::invalid_argument);
    EXPECT_THROW(make_cone(wide_cone(360, 10, 100)), std::invalid_argument);
    EXPECT_THROW(make_cone(wide_cone(60, 100, 100)), std::invalid_argument);
    EXPECT_THROW(make_cone(wide_cone(60, 50, 20)), std::invalid_argument);
}

TEST(Layout, EmptySliceHasNoOrgan) {
    const auto cone = make_cone(ConeParams{});
    const auto layout = compose_layout(Mask2D(64, 64, 3.0), cone, default_placement(cone.params));
    EXPECT_EQ(layout.count(LayoutClass::Organ), 0u);
    EXPECT_EQ(layout.count(LayoutClass::Cone), cone.mask.count());
}

TEST(Layout, PlacementConservesOrganAndPartitions) {
    const auto cone = make_cone(ConeParams{});
    const auto slice = disc(64, 30, 34, 12);
    const auto layout = compose_layout(slice, cone, default_placement(cone.params));
    EXPECT_EQ(layout.count(LayoutClass::Organ), slice.count());
    EXPECT_EQ(layout.count(LayoutClass::Organ) + layout.count(LayoutClass::Cone) + layout.count(LayoutClass::Outside),
              layout.rows * layout.cols);
    const auto organ = layout.organ_mask(), interior = layout.cone_mask();
    for (std::size_t i = 0; i < organ.px.size(); ++i)
        if (organ.px[i]) {
            EXPECT_TRUE(interior.px[i] && cone.mask.px[i]);
        }
    EXPECT_EQ(interior, cone.mask);
}

TEST(Layout, QuarterTurnConvention) {
    const auto cone = make_cone(ConeParams{});
    Mask2D bar(64, 64, 3.0);
    for (std::size_t r = 20; r < 44; ++r)
        for (std::size_t c = 30; c < 34; ++c) bar.at(r, c) = 1;  // vertical bar
    auto p = default_placement(cone.params);
    const auto turned = compose_layout(bar, cone, p).organ_mask();
    p.quarter_turn = false;
    EXPECT_EQ(turned, compose_layout(spv::phantom::rotate90_ccw(bar), cone, p).organ_mask());
    std::size_t r0 = 1000, r1 = 0, c0 = 1000, c1 = 0;
    for (std::size_t r = 0; r < turned.rows; ++r)
        for (std::size_t c = 0; c < turned.cols; ++c)
            if (turned.at(r, c)) r0 = std::min(r0, r), r1 = std::max(r1, r), c0 = std::min(c0, c), c1 = std::max(c1, c);
    EXPECT_EQ(r1 - r0 + 1, 4u);  // now horizontal
    EXPECT_EQ(c1 - c0 + 1, 24u);
}

TEST(Layout, OrganLeavingConeReportsOverlap) {
    const auto cone = make_cone(ConeParams{});
    const auto slice = disc(64, 32, 32, 8);
    Placement p{2.0, 39.5, true};  // above the inner radius, partly outside the image
    try {
        compose_layout(slice, cone, p);
        FAIL();
    } catch (const OrganOutsideCone& e) {
        EXPECT_GT(e.outside_pixels, 0u);
        EXPECT_LE(e.outside_pixels, slice.count());
    }
}

TEST(Layout, FittedPlacementHandlesLargePhantoms) {
    spv::phantom::DatasetConfig cfg;
    cfg.n = 20;
    cfg.min_volume_ml = 300;
    cfg.max_volume_ml = 660;
    cfg.splenomegaly_fraction = 0.9;
    const auto ds = spv::phantom::make_dataset(cfg);
    const auto cone = make_cone(ConeParams{});
    for (const auto& g : ds.grids) {
        const auto sel = spv::phantom::extract_max_area_slice(g, spv::phantom::SliceAxis::Coronal, 64);
        const auto layout = compose_layout_fitted(spv::phantom::center_on_centroid(sel.image), cone);
        EXPECT_EQ(layout.count(LayoutClass::Organ), sel.image.count());
    }
}

TEST(Render, ZeroOutsideConeAndDeterministic) {
    const auto cone = make_cone(ConeParams{});
    const auto layout = compose_layout(disc(64, 32, 32, 10), cone, default_placement(cone.params));
    const auto a = render_pseudo_us(layout, 11), b = render_pseudo_us(layout, 11), c = render_pseudo_us(layout, 12);
    EXPECT_EQ(a.intensity, b.intensity);
    EXPECT_NE(a.intensity, c.intensity);
    for (std::size_t i = 0; i < a.intensity.size(); ++i) {
        if (!cone.mask.px[i]) {
            EXPECT_EQ(a.intensity[i], 0.0);
            EXPECT_EQ(c.intensity[i], 0.0);
        }
        EXPECT_GE(a.intensity[i], 0.0);
        EXPECT_LE(a.intensity[i], 1.0);
    }
}

TEST(Render, OrganBrighterThanTissueOverSeeds) {
    const auto cone = make_cone(ConeParams{});
    const auto layout = compose_layout(disc(64, 30, 36, 14), cone, default_placement(cone.params));
    double total = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const double gap = mean_gap(layout, render_pseudo_us(layout, s));
        EXPECT_GT(gap, 0.0);
        total += gap;
    }
    const double avg = total / 100.0;
    EXPECT_GT(avg, 0.1);
    EXPECT_LT(avg, 0.4);
}

TEST(Render, NoiseOverlapsClasses) {
    // pixelwise the class distributions still overlap, so thresholding alone is not a segmentation
    const auto cone = make_cone(ConeParams{});
    const auto layout = compose_layout(disc(64, 30, 36, 14), cone, default_placement(cone.params));
    const auto img = render_pseudo_us(layout, 3);
    double organ_min = 1.0, tissue_max = 0.0;
    for (std::size_t i = 0; i < img.intensity.size(); ++i) {
        if (layout.cls[i] == 2) organ_min = std::min(organ_min, img.intensity[i]);
        if (layout.cls[i] == 1) tissue_max = std::max(tissue_max, img.intensity[i]);
    }
    EXPECT_LT(organ_min, tissue_max);
}

TEST(Pgm, RoundTripAndClassCodes) {
    const auto cone = make_cone(ConeParams{});
    const auto layout = compose_layout(disc(64, 32, 32, 10), cone, default_placement(cone.params));
    const auto gray = to_gray(layout);
    EXPECT_EQ(gray.px[0], 0);
    std::size_t n128 = 0, n255 = 0;
    for (auto v : gray.px) n128 += v == 128, n255 += v == 255;
    EXPECT_EQ(n255, layout.count(LayoutClass::Organ));
    EXPECT_EQ(n128, layout.count(LayoutClass::Cone));
    const auto path = std::filesystem::temp_directory_path() / "spv_layout_test.pgm";
    write_pgm(path, gray);
    const auto back = read_pgm(path);
    EXPECT_EQ(back.rows, gray.rows);
    EXPECT_EQ(back.cols, gray.cols);
    EXPECT_EQ(back.px, gray.px);
    const auto img = to_gray(render_pseudo_us(layout, 1));
    write_pgm(path, img);
    EXPECT_EQ(read_pgm(path).px, img.px);
}
