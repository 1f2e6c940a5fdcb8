#pragma once

#include "spv/grad/autograd.hpp"

namespace spv::grad {

// Elementwise (operands must have identical shapes).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// [N, ...] -> [N], summing everything but the leading axis.
Var sum_per_sample(const Var& a);
Var mean_per_sample(const Var& a);

Var reshape(const Var& a, Shape shape);

/// x [N, in], weight [out, in], bias [out] (bias may be undefined) -> [N, out].
Var linear(const Var& x, const Var& weight, const Var& bias);

/// x [N, C, H, W], weight [O, C, k, k], bias [O] (may be undefined).
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t padding);

/// Nearest-neighbour 2x upsample of [N, C, H, W].
Var upsample2x(const Var& x);

/// 2x2 max-pool with stride 2; H and W must be even.
Var max_pool2x2(const Var& x);

/// Concatenate [N, Ca, H, W] and [N, Cb, H, W] along channels.
Var concat_channels(const Var& a, const Var& b);

struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.9;  // weight on the previous running value
    double eps = 1e-7;
};

/// Per-channel normalisation of [N, C, H, W] (or [N, C]). Training mode uses
/// batch statistics and updates the running ones; inference uses running.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training);

/// Per-sample mean binary cross-entropy, predictions clamped to [eps, 1-eps].
/// pred and target share shape [N, ...]; result is [N].
Var binary_cross_entropy(const Var& pred, const Tensor& target, double eps = 1e-7);

}  // namespace spv::grad
