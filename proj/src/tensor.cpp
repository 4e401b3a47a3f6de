#include "liteseg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace liteseg {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

bool shape_eq(const Shape& a, const Shape& b) { return a == b; }

namespace detail {

void Node::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
}

}  // namespace detail

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (float& v : t.vec()) v = value;
    return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<float> values, bool requires_grad) {
    if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
        throw ShapeError("data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value) { return from_vector({1}, {value}); }

Tensor Tensor::make_node(Shape shape, std::vector<Tensor> inputs,
                         std::function<void(detail::Node&)> backprop) {
    auto node = std::make_shared<detail::Node>();
    node->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0f);
    node->shape = std::move(shape);
    bool needs = false;
    if (t_grad_enabled) {
        for (const Tensor& in : inputs) {
            if (in.defined() && in.requires_grad()) {
                needs = true;
                break;
            }
        }
    }
    if (needs) {
        node->requires_grad = true;
        node->inputs = std::move(inputs);
        node->backprop = std::move(backprop);
    }
    return Tensor(std::move(node));
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }

int Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw ShapeError("dim index out of range");
    return node_->shape[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::numel() const { return node_->numel(); }

const float* Tensor::data() const { return node_->data.data(); }
float* Tensor::data() { return node_->data.data(); }
const std::vector<float>& Tensor::vec() const { return node_->data; }
std::vector<float>& Tensor::vec() { return node_->data; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    if (!is_leaf()) throw Error("set_requires_grad is only valid on leaf tensors");
    node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return !node_->backprop; }

bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }

const std::vector<float>& Tensor::grad() const {
    if (!has_grad()) throw Error("tensor has no gradient; call backward first");
    return node_->grad;
}

std::vector<float>& Tensor::grad_vec() {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

bool Tensor::all_finite() const {
    for (float v : node_->data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::assert_finite(const std::string& what) const {
    if (!all_finite()) throw NumericError("non-finite values in " + what);
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw Error("backward on undefined tensor");
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }

    // Post-order DFS so nodes appear after everything they feed into.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    struct Frame {
        detail::Node* node;
        std::size_t next_input;
    };
    std::vector<Frame> stack;
    if (seen.insert(loss.node()).second) stack.push_back({loss.node(), 0});
    while (!stack.empty()) {
        Frame& frame = stack.back();
        if (frame.next_input < frame.node->inputs.size()) {
            detail::Node* child = frame.node->inputs[frame.next_input++].node();
            if (child != nullptr && seen.insert(child).second && !child->inputs.empty()) {
                stack.push_back({child, 0});
            }
        } else {
            order.push_back(frame.node);
            stack.pop_back();
        }
    }

    // Interior gradients are scratch for this call; leaf gradients accumulate
    // across calls.
    for (detail::Node* node : order) {
        if (node->backprop) node->grad.assign(node->data.size(), 0.0f);
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0f;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backprop) node->backprop(*node);
    }
}

}  // namespace liteseg
