#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace picat {

struct TensorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int>;

int64_t shape_numel(const Shape& shape);

// Dense tensor participating in a reverse-mode tape. The handle has shared
// ownership of its node; ops connect nodes into a graph that backward()
// walks in reverse topological order and then consumes.
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad; // allocated lazily
        bool requires_grad = false;
        bool consumed = false;
        std::string op_name = "leaf";
        std::vector<std::shared_ptr<Node>> parents;
        // accumulates this node's grad into its parents' grads
        std::function<void(Node&)> backward_fn;
    };

    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node().shape; }
    int64_t numel() const { return static_cast<int64_t>(node().value.size()); }
    int dim(int i) const { return node().shape.at(i); }

    std::vector<double>& data() { return node().value; }
    const std::vector<double>& data() const { return node().value; }
    double item() const;

    bool requires_grad() const { return node().requires_grad; }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    bool has_grad() const { return !node().grad.empty(); }
    void zero_grad();

    Node& node() {
        if (!node_) throw TensorError("use of undefined tensor");
        return *node_;
    }
    const Node& node() const {
        if (!node_) throw TensorError("use of undefined tensor");
        return *node_;
    }
    std::shared_ptr<Node> node_ptr() const { return node_; }

    // used by ops.cpp to build graph nodes
    static Tensor make_node(Shape shape, std::vector<double> value,
                            std::string op_name,
                            std::vector<std::shared_ptr<Node>> parents,
                            std::function<void(Node&)> backward_fn);

private:
    std::shared_ptr<Node> node_;
};

// Steers glibc away from mmap-backed allocations for the multi-megabyte
// buffers the graph churns through; without this every freed activation goes
// back to the kernel and training pays for it in page faults. No-op off
// glibc. Safe to call repeatedly.
void tune_allocator();

// Reverse pass from a scalar loss. Populates grads for every requires_grad
// tensor reachable from it, then releases the graph; a second call on the
// same loss is an error.
void backward(const Tensor& loss);

// Named trainable tensors, in registration order.
struct ParamSet {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& add(const std::string& name, Tensor t);
    Tensor* find(const std::string& name);
    void zero_grad();
    size_t size() const { return items.size(); }
};

} // namespace picat
