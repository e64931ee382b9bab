#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "d2c/numcore/tensor.hpp"

namespace d2c {

// One vertex of the reverse-mode tape. `backward` reads this node's gradient
// and accumulates into the gradients of `parents` that require one.
struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
};

// Shared handle to a tape node. Copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Var constant(Tensor value);
    static Var leaf(Tensor value);

    bool valid() const noexcept { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& value() { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    double item() const { return node_->value.item(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const { return node_->value.grad(); }

    Node* node() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& ptr() const noexcept { return node_; }

    // Propagate d(this)/d(leaf) into every reachable leaf. `this` must hold a
    // single element. Leaf gradients accumulate across calls.
    void backward() const;

    // Same value, no history.
    Var detach() const { return constant(node_->value); }

private:
    std::shared_ptr<Node> node_;
};

// Builds the result node of an op. When no parent needs a gradient, or
// gradient recording is disabled, the node is a constant.
Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

// Gradient buffer of parent `i` of `self`, or an empty span if that parent
// does not require a gradient.
std::span<double> parent_grad(Node& self, std::size_t i);

bool grad_enabled() noexcept;

// Disables graph construction for its lifetime (evaluation, finite differences).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

} // namespace d2c
