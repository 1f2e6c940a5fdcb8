#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spv/grad/nn.hpp"

namespace spv::vae {

using grad::Parameter;
using grad::ParameterStore;
using grad::Tensor;
using grad::Var;

enum class ViewMode { Single, Dual };
enum class HeadInput { Mu, Z };

const char* to_string(ViewMode v);
const char* to_string(HeadInput h);

struct VAEConfig {
    ViewMode views = ViewMode::Single;
    std::size_t input_size = 64;
    std::size_t latent_dim = 32;
    std::size_t base_channels = 8;
    std::size_t head_hidden = 64;
    double w1 = 0.2;
    double w2 = 0.2;
    double volume_scale = 10.0;
    HeadInput head_input = HeadInput::Mu;
};

std::size_t input_channels(const VAEConfig& cfg);

/// Throws std::invalid_argument when the config breaks its invariants.
void validate(const VAEConfig& cfg);

struct Encoded {
    Var mu;      // [N, D]
    Var logvar;  // [N, D]; sigma = exp(logvar / 2)
};

struct LatentCode {
    std::vector<double> mu;
    std::vector<double> sigma;
};

/// Residual convolutional VAE with a small regression head. Parameter names
/// are prefixed "enc.", "dec." and "head.".
class VAE {
public:
    VAE(const VAEConfig& cfg, std::uint64_t init_seed);
    VAE(const VAE&) = delete;
    VAE& operator=(const VAE&) = delete;
    ~VAE();

    const VAEConfig& config() const { return cfg_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }

    /// x: [N, C, S, S] with C = input_channels(config).
    Encoded encode(const Var& x, bool training);
    /// z: [N, D] -> [N, C, S, S] in (0, 1).
    Var decode(const Var& z, bool training);
    /// [N, D] -> [N, 1] scaled volume (mL / volume_scale).
    Var head(const Var& latent, bool training);

    std::vector<Parameter> vae_params() const;
    std::vector<Parameter> head_params() const;

private:
    struct Net;
    VAEConfig cfg_;
    ParameterStore store_;
    std::unique_ptr<Net> net_;
};

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& zeta);
std::vector<double> reparameterize(const LatentCode& code, const std::vector<double>& zeta);

/// Per-sample BCE averaged over every channel and pixel -> [N].
Var bce_loss(const Var& recon, const Tensor& target);
/// Per-sample KL divergence to N(0, I), summed over latent dims -> [N].
Var kld_loss(const Var& mu, const Var& logvar);
/// mean_i(bce_i + w1 * kld_i).
Var total_loss(const Var& bce, const Var& kld, double w1);
/// mean_i(bce_i + w1 * kld_i + w2 * (pred_i - target_i)^2); target is the
/// scaled volume. Throws if the target is missing or mis-sized.
Var rvae_loss(const Var& bce, const Var& kld, const Var& pred, const Tensor& scaled_target, double w1, double w2);

/// Stacks [C, S, S] samples into a [N, C, S, S] batch.
Tensor stack(const std::vector<const Tensor*>& samples);

/// Inference helpers (no graph, batch-norm running statistics).
std::vector<LatentCode> encode_all(VAE& model, const std::vector<Tensor>& inputs, std::size_t batch = 32);
std::vector<Tensor> reconstruct_all(VAE& model, const std::vector<Tensor>& inputs, std::size_t batch = 32);
std::vector<Tensor> decode_latents(VAE& model, const std::vector<std::vector<double>>& zs);
/// Head applied to explicit latent vectors, returning raw scaled outputs.
std::vector<double> head_outputs(VAE& model, const std::vector<std::vector<double>>& latents);

}  // namespace spv::vae
