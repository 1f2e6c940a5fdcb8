#include <gtest/gtest.h>

#include "../support/gradcheck.hpp"
#include "spv/segnet/unet.hpp"

using namespace spv;
using namespace spv::segnet;
using grad::Shape;

namespace {

// Bright disc on a darker noisy background; the mask is the disc.
SegPair toy_pair(std::size_t size, double cr, double cc, double radius, Rng& rng) {
    std::normal_distribution<double> noise(0.0, 0.08);
    SegPair p{Tensor({1, size, size}), Tensor({1, size, size})};
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t c = 0; c < size; ++c) {
            const bool in = (r - cr) * (r - cr) + (c - cc) * (c - cc) <= radius * radius;
            p.mask[r * size + c] = in;
            p.image[r * size + c] = (in ? 0.65 : 0.35) + noise(rng);
        }
    return p;
}

std::vector<SegPair> toy_set(std::size_t n, std::size_t size, Rng& rng) {
    std::uniform_real_distribution<double> pos(size * 0.35, size * 0.65), rad(size * 0.12, size * 0.25);
    std::vector<SegPair> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(toy_pair(size, pos(rng), pos(rng), rad(rng), rng));
    return out;
}

}  // namespace

TEST(UNetShape, OutputMatchesInput) {
    UNetConfig cfg;
    cfg.input_size = 64;
    UNet net(cfg, 1);
    Rng rng(2);
    const auto y = net.forward(Var(spv::testing::random_tensor({2, 1, 64, 64}, rng, 0, 1)), false);
    EXPECT_EQ(y.shape(), (Shape{2, 1, 64, 64}));
    UNet big(UNetConfig{}, 1);
    EXPECT_EQ(big.forward(Var(Tensor({1, 1, 80, 80}, 0.3)), false).shape(), (Shape{1, 1, 80, 80}));
    EXPECT_THROW(big.forward(Var(Tensor({1, 1, 64, 64}, 0.3)), false), grad::ShapeError);
}

TEST(UNetShape, IndivisibleInputRejected) {
    UNetConfig cfg;
    cfg.input_size = 72;
    EXPECT_THROW(UNet(cfg, 0), std::invalid_argument);
    cfg.input_size = 48;
    EXPECT_NO_THROW(UNet(cfg, 0));
}

TEST(UNetShape, ParameterCountFollowsArchitecture) {
    for (std::size_t base : {4u, 8u, 16u}) {
        UNetConfig cfg;
        cfg.base_channels = base;
        UNet net(cfg, 0);
        EXPECT_EQ(net.store().parameter_count(), expected_parameter_count(cfg));
    }
    // hand count for a one-level, one-conv net with width 2: down 1->2, bottleneck 2->4,
    // upconv 4->2, block 4->2, output 2->1 with bias
    UNetConfig tiny{16, 2, 1, 1};
    const std::size_t hand = (9 * 1 * 2 + 4) + (9 * 2 * 4 + 8) + (9 * 4 * 2 + 4) + (9 * 4 * 2 + 4) + 3;
    EXPECT_EQ(expected_parameter_count(tiny), hand);
    EXPECT_EQ(UNet(tiny, 0).store().parameter_count(), hand);
    UNetConfig a, b;
    b.base_channels = 16;
    const double ratio = static_cast<double>(expected_parameter_count(b)) / expected_parameter_count(a);
    EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(UNetShape, ZeroWeightsGiveHalfAndEmptyMask) {
    UNetConfig cfg;
    cfg.input_size = 32;
    UNet net(cfg, 3);
    for (const auto& p : net.store().params()) {
        auto v = p.var;
        v.mutable_value().fill(0.0);
    }
    Rng rng(4);
    const Tensor img = spv::testing::random_tensor({1, 32, 32}, rng, 0, 1);
    const auto y = net.forward(Var(Tensor(Shape{1, 1, 32, 32}, std::vector<double>(img.data().begin(), img.data().end()))), false);
    for (double v : y.value().data()) EXPECT_EQ(v, 0.5);
    const auto mask = segment(net, img);
    EXPECT_EQ(mask.count(), 0u);
    EXPECT_THROW(segment(net, Tensor({1, 16, 16})), grad::ShapeError);
}

TEST(UNetTraining, LearnsToyDiscsDeterministically) {
    UNetConfig cfg;
    cfg.input_size = 32;
    Rng rng(9);
    const auto train = toy_set(16, 32, rng), val = toy_set(6, 32, rng);
    SegSchedule sch;
    sch.epochs = 20;
    sch.batch_size = 4;
    UNet a(cfg, 5), b(cfg, 5);
    const auto ra = train_unet(a, train, val, sch, 7);
    const auto rb = train_unet(b, train, val, sch, 7);
    ASSERT_EQ(ra.log.size(), 20u);
    for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].train_bce, rb.log[i].train_bce);
    EXPECT_GT(ra.best_val_dice, 0.85);
    EXPECT_LT(ra.log.back().train_bce, ra.log.front().train_bce);
    for (const auto& m : segment_all(a, {val[0].image, val[1].image}))
        for (auto v : m.px) EXPECT_TRUE(v == 0 || v == 1);
    std::vector<SegPair> few(train.begin(), train.begin() + 9);
    EXPECT_THROW(train_unet(a, few, val, sch, 7), std::invalid_argument);
}
