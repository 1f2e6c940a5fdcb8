#pragma once

#include <vector>

#include "spv/grad/nn.hpp"

namespace spv::grad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias-corrected moments over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Parameter> params, AdamConfig config = {});

    /// Applies one update from the currently accumulated gradients. Throws
    /// NumericalError naming the first parameter whose gradient is not finite;
    /// no parameter is modified in that case.
    void step();

    std::size_t steps() const { return step_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Parameter>& params() const { return params_; }

private:
    std::vector<Parameter> params_;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
    AdamConfig config_;
    std::size_t step_ = 0;
};

}  // namespace spv::grad
