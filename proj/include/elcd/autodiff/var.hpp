#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "elcd/autodiff/tensor.hpp"

namespace elcd::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// Receives the output gradient and accumulates into the parents' gradient
/// slots. A slot is null when that parent does not require a gradient.
using BackwardFn = std::function<void(const Tensor& grad, std::span<Tensor* const> parent_grads)>;

struct Node {
    Tensor value;
    std::vector<NodePtr> parents;
    BackwardFn backward;
    bool requires_grad = false;
    std::string param_id;  // non-empty only for parameter leaves
};

/// Handle to a recorded value. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    /// A value that never receives a gradient.
    static Var constant(Tensor value);
    /// A free input that receives a gradient (only meaningful outside no-grad scopes).
    static Var leaf(Tensor value);
    /// Records an operation. Parents and the backward closure are dropped when
    /// no parent requires a gradient or recording is disabled.
    static Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool valid() const noexcept { return static_cast<bool>(node_); }
    const NodePtr& node() const { return node_; }

private:
    NodePtr node_;
};

bool grad_enabled() noexcept;

/// Disables recording for its lifetime (per thread).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// A named trainable tensor. The value lives in a leaf node so that graphs
/// recorded from var() read the current value; copies are deep.
class Parameter {
public:
    Parameter(std::string id, Tensor value, bool trainable = true);
    Parameter(const Parameter& other);
    Parameter& operator=(const Parameter& other);
    Parameter(Parameter&&) noexcept = default;
    Parameter& operator=(Parameter&&) noexcept = default;

    const std::string& id() const { return node_->param_id; }
    const Tensor& value() const { return node_->value; }
    /// Shape is fixed after construction.
    std::span<double> mutable_values() { return node_->value.values(); }
    void set_value(const Tensor& value);
    bool trainable() const { return node_->requires_grad; }
    void set_trainable(bool trainable) { node_->requires_grad = trainable; }
    Var var() const { return Var(node_); }

private:
    NodePtr node_;
};

using ParameterRefs = std::vector<Parameter*>;

/// Parameter id -> gradient of the same shape.
class GradientMap {
public:
    bool contains(const std::string& id) const { return grads_.count(id) != 0; }
    const Tensor& at(const std::string& id) const;
    std::size_t size() const noexcept { return grads_.size(); }
    auto begin() const { return grads_.begin(); }
    auto end() const { return grads_.end(); }
    void insert(const std::string& id, Tensor grad);

private:
    std::map<std::string, Tensor> grads_;
};

/// Reverse pass from a scalar loss; gradients for every trainable parameter
/// reached by the recording. Does not modify the recording.
GradientMap backward(const Var& loss);

/// Gradients of a scalar loss with respect to arbitrary recorded values
/// (typically leaves). Unreached values get zeros.
std::vector<Tensor> gradients(const Var& loss, std::span<const Var> wrt);

}  // namespace elcd::ad
