#include <gtest/gtest.h>

#include "spv/app/commands.hpp"
#include "spv/app/data.hpp"
#include "spv/phantom/phantom.hpp"

using namespace spv;
using namespace spv::app;

namespace {

const phantom::VoxelGrid& test_grid() {
    static const phantom::VoxelGrid grid = [] {
        phantom::DatasetConfig cfg;
        cfg.n = 10;
        return phantom::make_dataset(cfg).grids[1];
    }();
    return grid;
}

}  // namespace

TEST(ModelInput, ShapesAndBinaryChannels) {
    const auto& g = test_grid();
    const auto single = to_input(g, vae::ViewMode::Single, 64);
    const auto dual = to_input(g, vae::ViewMode::Dual, 64);
    EXPECT_EQ(single.shape(), (grad::Shape{1, 64, 64}));
    EXPECT_EQ(dual.shape(), (grad::Shape{2, 64, 64}));
    for (double v : dual.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_EQ(channel_mask(dual, 0), channel_mask(single, 0));
    EXPECT_GT(channel_mask(dual, 1).count(), 0u);
}

TEST(ModelInput, SliceIsCentred) {
    const auto m = model_slice(test_grid(), SliceAxis::Coronal, 64);
    double sr = 0, sc = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            if (m.at(r, c)) sr += r, sc += c, ++n;
    ASSERT_GT(n, 0u);
    EXPECT_LE(std::abs(sr / n - 31.5), 1.0);
    EXPECT_LE(std::abs(sc / n - 31.5), 1.0);
}

TEST(Augmentation, VariantZeroIsPlainAndBankIsSeeded) {
    const auto& g = test_grid();
    AugmentConfig cfg;
    cfg.variants = 4;
    const auto a = augmentation_bank(g, vae::ViewMode::Dual, 64, cfg, 3);
    const auto b = augmentation_bank(g, vae::ViewMode::Dual, 64, cfg, 3);
    const auto c = augmentation_bank(g, vae::ViewMode::Dual, 64, cfg, 4);
    ASSERT_EQ(a.size(), 4u);
    EXPECT_EQ(a[0], to_input(g, vae::ViewMode::Dual, 64));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(a[0], c[0]);
    bool differs = false;
    for (std::size_t i = 1; i < a.size(); ++i) differs |= a[i] != c[i];
    EXPECT_TRUE(differs);
    // small rotations keep the area close to the original
    const double base = static_cast<double>(channel_mask(a[0], 0).count());
    for (std::size_t i = 1; i < a.size(); ++i)
        EXPECT_LT(std::abs(channel_mask(a[i], 0).count() - base) / base, 0.5);
}

TEST(UsMapping, LayoutOrganMapsBackToModelSlice) {
    const auto cone = ussim::make_cone(ussim::ConeParams{});
    phantom::DatasetConfig cfg;
    cfg.n = 10;
    const auto ds = phantom::make_dataset(cfg);
    for (const auto& g : ds.grids) {
        const auto slice = model_slice(g, SliceAxis::Coronal, 64);
        const auto layout = ussim::compose_layout_fitted(slice, cone);
        const auto back = us_mask_to_model_frame(layout.organ_mask(), 64);
        EXPECT_EQ(back.px, slice.px);
    }
}

TEST(UsMapping, KeepsLargestComponentOnly) {
    phantom::Mask2D m(80, 80);
    for (std::size_t r = 30; r < 50; ++r)
        for (std::size_t c = 30; c < 45; ++c) m.at(r, c) = 1;
    m.at(2, 2) = 1;
    m.at(70, 75) = 1;
    const auto back = us_mask_to_model_frame(m, 64);
    EXPECT_EQ(back.count(), 300u);
    EXPECT_EQ(us_mask_to_model_frame(phantom::Mask2D(80, 80), 64).count(), 0u);
}

TEST(Config, PresetsRoundTripThroughJson) {
    for (const char* name : {"desk", "paper"}) {
        const auto cfg = preset_config(name);
        const auto j = to_json(cfg);
        EXPECT_EQ(to_json(config_from_json(j)), j);
    }
    const auto paper = preset_config("paper");
    EXPECT_EQ(paper.vae.latent_dim, 128u);
    EXPECT_EQ(paper.train.schedule.stage1_epochs, 150u);
    EXPECT_EQ(paper.train.schedule.total_epochs, 800u);
    EXPECT_EQ(paper.train.schedule.batch_size, 8u);
    EXPECT_DOUBLE_EQ(paper.train.schedule.lr, 1e-3);
    EXPECT_DOUBLE_EQ(paper.vae.w1, 0.2);
    EXPECT_DOUBLE_EQ(paper.vae.w2, 0.2);
    EXPECT_DOUBLE_EQ(paper.threshold_ml, 314.5);
    const auto desk = preset_config("desk");
    EXPECT_EQ(desk.data.n, 200u);
    EXPECT_EQ(desk.train.schedule.stage1_epochs, 30u);
    EXPECT_EQ(desk.train.schedule.total_epochs, 130u);
}

TEST(Config, OverlayAndErrors) {
    nlohmann::ordered_json j = {{"preset", "paper"}, {"seed", 11}, {"vae", {{"w2", 0.3}}}, {"views", {"dual"}}};
    const auto cfg = config_from_json(j);
    EXPECT_EQ(cfg.seed, 11u);
    EXPECT_DOUBLE_EQ(cfg.vae.w2, 0.3);
    EXPECT_EQ(cfg.vae.latent_dim, 128u);
    ASSERT_EQ(cfg.views.size(), 1u);
    EXPECT_EQ(cfg.views[0], vae::ViewMode::Dual);
    EXPECT_THROW(config_from_json({{"nope", 1}}), ConfigError);
    EXPECT_THROW(config_from_json({{"vae", {{"w9", 1}}}}), ConfigError);
    EXPECT_THROW(config_from_json({{"preset", "huge"}}), ConfigError);
    EXPECT_THROW(config_from_json({{"seed", "abc"}}), ConfigError);
    EXPECT_THROW(config_from_json({{"views", {"triple"}}}), ConfigError);
    EXPECT_THROW(config_from_json({{"train", {{"stage1_epochs", 200}, {"total_epochs", 100}}}}), ConfigError);
    EXPECT_THROW(config_from_json({{"train", {{"validation_folds", {0, 1}}}}}), ConfigError);
    EXPECT_THROW(config_from_json({{"unet", {{"depth", 6}}}}), ConfigError);
    EXPECT_NE(config_schema().find("threshold_ml"), std::string::npos);
}
