#include "d2c/numcore/autodiff.hpp"

#include <unordered_set>

#include "d2c/numcore/errors.hpp"

namespace d2c {
namespace {
thread_local bool g_grad_enabled = true;
} // namespace

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var Var::constant(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var Var::leaf(Tensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->value.ensure_grad();
    return Var(std::move(node));
}

Var make_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (!g_grad_enabled) return Var(std::move(node));
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return Var(std::move(node));
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.ptr());
    node->backward = std::move(backward);
    return Var(std::move(node));
}

std::span<double> parent_grad(Node& self, std::size_t i) {
    Node& p = *self.parents[i];
    if (!p.requires_grad) return {};
    return p.value.grad();
}

void Var::backward() const {
    if (node_->value.size() != 1) {
        throw ShapeError("backward() needs a scalar, got shape " +
                         shape_string(node_->value.shape()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    // Interior nodes start from zero; leaves keep what they have accumulated.
    for (Node* n : order) {
        if (n->backward) {
            n->value.ensure_grad();
            n->value.zero_grad();
        } else {
            n->value.ensure_grad();
        }
    }
    node_->value.grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

} // namespace d2c
