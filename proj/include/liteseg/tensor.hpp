#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "liteseg/errors.hpp"

namespace liteseg {

// Dense extents, outermost first. 4-D activations are [N, C, H, W] with W
// fastest in memory.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool shape_eq(const Shape& a, const Shape& b);

class Tensor;

namespace detail {

struct Node {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    std::vector<float> grad;        // allocated lazily, same length as data
    std::vector<Tensor> inputs;     // graph parents; empty for leaves
    std::function<void(Node&)> backprop;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    void ensure_grad();
};

}  // namespace detail

// Reverse-mode automatic differentiation is on by default; inference paths
// disable it with NoGradGuard so ops do not retain their inputs.
bool grad_enabled();

class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Shared handle to a dense float32 tensor. Values are immutable once produced
// by an op; leaves may be mutated in place by the optimizer, which has
// exclusive access during a training step.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from_vector(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value);

    // Internal: build an op result wired into the tape.
    static Tensor make_node(Shape shape, std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backprop);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::int64_t numel() const;

    const float* data() const;
    float* data();
    const std::vector<float>& vec() const;
    std::vector<float>& vec();

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool is_leaf() const;

    bool has_grad() const;
    const std::vector<float>& grad() const;
    std::vector<float>& grad_vec();
    void zero_grad();

    bool all_finite() const;
    // Throws NumericError naming `what` if any element is NaN/Inf.
    void assert_finite(const std::string& what) const;

    detail::Node* node() const { return node_.get(); }

  private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

// Populates gradients of every requires_grad leaf reachable from `loss`
// (d loss / d leaf). `loss` must be scalar. Repeated calls without zero_grad
// accumulate into leaf gradients.
void backward(const Tensor& loss);

}  // namespace liteseg
