#include "spv/grad/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace spv::grad {

Adam::Adam(std::vector<Parameter> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    if (!(config_.lr > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
    for (const auto& p : params_) {
        first_.emplace_back(p.value().shape());
        second_.emplace_back(p.value().shape());
    }
}

void Adam::step() {
    for (const auto& p : params_) {
        const Tensor& g = p.gradient();
        if (g.shape() != p.value().shape()) throw ShapeError("adam", "gradient of '" + p.name + "' not allocated");
        if (!g.all_finite()) throw NumericalError("adam: non-finite gradient in parameter '" + p.name + "'");
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& w = params_[k].var.mutable_value();
        const Tensor& g = params_[k].gradient();
        Tensor& m = first_[k];
        Tensor& v = second_[k];
        for (std::size_t i = 0; i < w.numel(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

}  // namespace spv::grad
