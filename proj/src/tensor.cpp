#include "picat/tensor.hpp"

#include <cmath>
#include <unordered_set>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace picat {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw TensorError("shape extents must be positive");
        n *= e;
    }
    return n;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw TensorError("data length does not match shape");
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw TensorError("item() on non-scalar tensor");
    return node().value[0];
}

std::vector<double>& Tensor::grad() {
    auto& n = node();
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

const std::vector<double>& Tensor::grad() const {
    const auto& n = node();
    if (n.grad.empty()) throw TensorError("gradient not populated");
    return n.grad;
}

void Tensor::zero_grad() {
    auto& n = node();
    n.grad.assign(n.value.size(), 0.0);
}

Tensor Tensor::make_node(Shape shape, std::vector<double> value,
                         std::string op_name,
                         std::vector<std::shared_ptr<Node>> parents,
                         std::function<void(Node&)> backward_fn) {
    for (double v : value) {
        if (!std::isfinite(v))
            throw TensorError("non-finite value produced by op " + op_name);
    }
    Tensor t(std::move(shape), std::move(value), false);
    auto& n = t.node();
    n.op_name = std::move(op_name);
    for (const auto& p : parents) {
        if (p->requires_grad) {
            n.requires_grad = true;
            break;
        }
    }
    if (n.requires_grad) {
        n.parents = std::move(parents);
        n.backward_fn = std::move(backward_fn);
    }
    return t;
}

void tune_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, -1);
#endif
}

void backward(const Tensor& loss) {
    Tensor handle = loss; // shared node, non-const access
    auto& root = handle.node();
    if (loss.numel() != 1) throw TensorError("backward requires a scalar loss");
    if (root.consumed) throw TensorError("backward on an already-consumed tape");
    if (!root.requires_grad)
        throw TensorError("loss does not depend on any trainable tensor");

    // iterative post-order DFS
    std::vector<Tensor::Node*> order;
    std::unordered_set<Tensor::Node*> visited;
    std::vector<std::pair<Tensor::Node*, size_t>> stack{{&root, 0}};
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor::Node* parent = node->parents[idx++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Tensor::Node* n : order) {
        if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    }
    root.grad[0] = 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor::Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }

    // release saved intermediates
    for (Tensor::Node* n : order) {
        n->backward_fn = nullptr;
        n->parents.clear();
        if (n != &root && !n->value.empty() && n->op_name != "leaf") n->grad.clear();
    }
    root.consumed = true;
}

Tensor& ParamSet::add(const std::string& name, Tensor t) {
    items.emplace_back(name, std::move(t));
    return items.back().second;
}

Tensor* ParamSet::find(const std::string& name) {
    for (auto& [n, t] : items)
        if (n == name) return &t;
    return nullptr;
}

void ParamSet::zero_grad() {
    for (auto& [n, t] : items) t.zero_grad();
}

} // namespace picat
