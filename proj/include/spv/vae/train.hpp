#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spv/vae/vae.hpp"

namespace spv::vae {

/// One record: its ground-truth volume and a bank of augmented inputs
/// ([C, S, S] each). Variant 0 is the unaugmented view used for validation.
struct VAESample {
    std::string id;
    double volume_ml = 0.0;
    std::vector<Tensor> variants;
};

struct TrainSchedule {
    std::size_t stage1_epochs = 30;
    std::size_t total_epochs = 130;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    bool fast_gemm = false;      // single-precision matrix products during training
    std::size_t ci_samples = 100;  // latent draws per validation estimate for z-head models
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    int stage = 1;
    double bce = 0.0;
    double kld = 0.0;
    std::optional<double> mse;       // stage 2 only
    std::optional<double> val_mrva;  // stage 2 only
};

struct TrainResult {
    std::vector<grad::NamedTensor> stage1;  // weights at the end of stage 1
    std::vector<grad::NamedTensor> best;    // best validation MRVA in stage 2 (stage 1 weights when there is none)
    std::size_t best_epoch = 0;
    std::optional<double> best_val_mrva;
    std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Stage 1: VAE loss only (w2 = 0); the regression head is left untouched.
std::vector<EpochLog> train_stage1(VAE& model, const std::vector<VAESample>& train, const TrainSchedule& schedule,
                                   std::uint64_t seed, const EpochCallback& progress = {});

/// Stage 2: joint loss with the configured weights, epochs numbered from
/// stage1_epochs + 1. Keeps the weights with the best validation MRVA and
/// leaves them loaded in the model.
TrainResult train_stage2(VAE& model, const std::vector<VAESample>& train, const std::vector<VAESample>& val,
                         const TrainSchedule& schedule, std::uint64_t seed, const EpochCallback& progress = {});

/// Both stages; `result.stage1` snapshots the plain VAE.
TrainResult train_vae(VAE& model, const std::vector<VAESample>& train, const std::vector<VAESample>& val,
                      const TrainSchedule& schedule, std::uint64_t seed, const EpochCallback& progress = {});

/// Volume estimate in mL for each input. Mu-head models apply the head to mu;
/// z-head models return the mean over `samples` latent draws from `seed`.
/// Raw head output times the volume scale, not floored.
std::vector<double> raw_volume_estimates(VAE& model, const std::vector<Tensor>& inputs, std::size_t samples = 100,
                                         std::uint64_t seed = 0);

std::string log_csv(const std::vector<EpochLog>& log);

}  // namespace spv::vae
