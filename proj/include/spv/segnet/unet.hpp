#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "spv/grad/nn.hpp"
#include "spv/phantom/mask2d.hpp"

namespace spv::segnet {

using grad::Tensor;
using grad::Var;

struct UNetConfig {
    std::size_t input_size = 80;
    std::size_t base_channels = 8;
    std::size_t depth = 4;             // pooling steps; widths double per level
    std::size_t convs_per_block = 3;
};

/// Throws std::invalid_argument unless input_size is divisible by 2^depth.
void validate(const UNetConfig& cfg);

/// Trainable parameter count implied by the architecture.
std::size_t expected_parameter_count(const UNetConfig& cfg);

/// Encoder-decoder with concatenated skips and a one-channel sigmoid output
/// at the input resolution.
class UNet {
public:
    UNet(const UNetConfig& cfg, std::uint64_t init_seed);
    UNet(const UNet&) = delete;
    UNet& operator=(const UNet&) = delete;
    ~UNet();

    const UNetConfig& config() const { return cfg_; }
    grad::ParameterStore& store() { return store_; }
    const grad::ParameterStore& store() const { return store_; }

    /// [N, 1, S, S] -> [N, 1, S, S] probabilities.
    Var forward(const Var& x, bool training);

private:
    struct Net;
    UNetConfig cfg_;
    grad::ParameterStore store_;
    std::unique_ptr<Net> net_;
};

/// Foreground where the predicted probability is strictly above 0.5.
phantom::Mask2D segment(UNet& model, const Tensor& image);
std::vector<phantom::Mask2D> segment_all(UNet& model, const std::vector<Tensor>& images, std::size_t batch = 8);

struct SegPair {
    Tensor image;  // [1, S, S]
    Tensor mask;   // [1, S, S] in {0, 1}
};

struct SegSchedule {
    std::size_t epochs = 100;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    bool fast_gemm = false;
};

struct SegEpoch {
    std::size_t epoch = 0;
    double train_bce = 0.0;
    double val_dice = 0.0;
};

struct SegTrainResult {
    std::vector<grad::NamedTensor> best;
    std::size_t best_epoch = 0;
    double best_val_dice = 0.0;
    std::vector<SegEpoch> log;
};

/// Per-pixel BCE with Adam; keeps (and leaves loaded) the weights with the
/// best mean validation Dice. Requires at least 10 training pairs.
SegTrainResult train_unet(UNet& model, const std::vector<SegPair>& train, const std::vector<SegPair>& val,
                          const SegSchedule& schedule, std::uint64_t seed,
                          const std::function<void(const SegEpoch&)>& progress = {});

}  // namespace spv::segnet
