#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "spv/grad/tensor.hpp"

namespace spv::grad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation (or eagerly for parameters)
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // pushes this->grad into parents
    bool requires_grad = false;
    const char* op = "leaf";

    Tensor& grad_buffer();
};

/// Handle to a node in the recorded computation. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Whether ops record a graph on this thread. Off during inference.
bool grad_enabled();

class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool previous_;
};

/// Builds a result node; parents are recorded only when grad mode is on and
/// some parent requires a gradient.
Var make_result(Tensor value, std::vector<Var> parents, const char* op, std::function<void(Node&)> backward);

/// Reverse sweep from a scalar loss. Gradients accumulate into every
/// reachable node that requires one.
void backward(const Var& loss);

}  // namespace spv::grad
