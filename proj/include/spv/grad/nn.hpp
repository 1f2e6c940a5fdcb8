#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "spv/common/rng.hpp"
#include "spv/grad/ops.hpp"

namespace spv::grad {

struct Parameter {
    std::string name;
    Var var;

    const Tensor& value() const { return var.value(); }
    const Tensor& gradient() const { return var.grad(); }
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

/// Owns a model's trainable parameters and non-trainable buffers (batch-norm
/// running statistics). Names are unique across both.
class ParameterStore {
public:
    ParameterStore() = default;
    ParameterStore(const ParameterStore&) = delete;
    ParameterStore& operator=(const ParameterStore&) = delete;

    Var add(const std::string& name, Tensor init);
    BatchNormState& add_batch_norm(const std::string& name, std::size_t channels);

    const std::vector<Parameter>& params() const { return params_; }
    std::vector<Parameter> params_with_prefix(const std::string& prefix) const;
    std::size_t parameter_count() const;

    void zero_grad();

    /// Parameters followed by buffers, in registration order.
    std::vector<NamedTensor> export_tensors() const;
    /// Overwrites values in place; every stored name must be present with an
    /// identical shape.
    void import_tensors(const std::vector<NamedTensor>& tensors);

private:
    void claim(const std::string& name);

    std::vector<Parameter> params_;
    std::deque<std::pair<std::string, BatchNormState>> norms_;
    std::map<std::string, int> names_;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
           std::size_t stride, std::size_t padding, bool bias, Rng& rng);
    Var operator()(const Var& x) const { return conv2d(x, weight_, bias_, stride_, padding_); }

private:
    Var weight_, bias_;
    std::size_t stride_ = 1, padding_ = 0;
};

class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
           double init_gain = 2.0);
    Var operator()(const Var& x) const { return linear(x, weight_, bias_); }
    const Var& weight() const { return weight_; }
    const Var& bias() const { return bias_; }

private:
    Var weight_, bias_;
};

class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels);
    Var operator()(const Var& x, bool training) const { return batch_norm(x, gamma_, beta_, *state_, training); }

private:
    Var gamma_, beta_;
    BatchNormState* state_ = nullptr;
};

}  // namespace spv::grad
