#include "elcd/autodiff/var.hpp"

#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "elcd/errors.hpp"

namespace elcd::ad {

namespace {

thread_local bool g_grad_enabled = true;

std::vector<Node*> topological_order(Node* root) {
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    return order;  // parents before children
}

std::unordered_map<Node*, Tensor> run_backward(const Var& loss) {
    if (!loss.valid()) throw Error("backward on an empty Var");
    if (loss.size() != 1) {
        throw ShapeError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    std::unordered_map<Node*, Tensor> grads;
    if (!loss.requires_grad()) return grads;
    Node* root = loss.node().get();
    const auto order = topological_order(root);
    grads.emplace(root, Tensor(root->value.shape(), 1.0));
    std::vector<Tensor*> slots;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward) continue;
        auto found = grads.find(node);
        if (found == grads.end()) continue;
        slots.assign(node->parents.size(), nullptr);
        for (std::size_t i = 0; i < node->parents.size(); ++i) {
            Node* parent = node->parents[i].get();
            if (!parent->requires_grad) continue;
            auto [slot, inserted] = grads.try_emplace(parent, Tensor());
            if (inserted) slot->second = Tensor(parent->value.shape());
            slots[i] = &slot->second;
        }
        // unordered_map keeps element addresses stable across rehashing.
        const Tensor& g = found->second;
        node->backward(g, slots);
    }
    return grads;
}

}  // namespace

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
    return Var(std::move(node));
}

Var Var::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (g_grad_enabled) {
        bool any = false;
        for (const Var& p : parents) any = any || p.requires_grad();
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(parents.size());
            for (Var& p : parents) node->parents.push_back(p.node());
            node->backward = std::move(backward);
        }
    }
    return Var(std::move(node));
}

Parameter::Parameter(std::string id, Tensor value, bool trainable) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->param_id = std::move(id);
    node_->requires_grad = trainable;
}

Parameter::Parameter(const Parameter& other) : node_(std::make_shared<Node>()) {
    node_->value = other.node_->value;
    node_->param_id = other.node_->param_id;
    node_->requires_grad = other.node_->requires_grad;
}

Parameter& Parameter::operator=(const Parameter& other) {
    if (this != &other) *this = Parameter(other);
    return *this;
}

void Parameter::set_value(const Tensor& value) {
    if (value.shape() != node_->value.shape()) {
        throw ShapeError("parameter '" + id() + "' has shape " + shape_string(node_->value.shape()) +
                         ", got " + shape_string(value.shape()));
    }
    node_->value = value;
}

const Tensor& GradientMap::at(const std::string& id) const {
    auto it = grads_.find(id);
    if (it == grads_.end()) throw Error("no gradient recorded for parameter '" + id + "'");
    return it->second;
}

void GradientMap::insert(const std::string& id, Tensor grad) {
    if (!grads_.emplace(id, std::move(grad)).second) {
        throw Error("duplicate parameter id '" + id + "' in one recording");
    }
}

GradientMap backward(const Var& loss) {
    auto grads = run_backward(loss);
    GradientMap out;
    for (auto& [node, grad] : grads) {
        if (!node->param_id.empty()) out.insert(node->param_id, std::move(grad));
    }
    return out;
}

std::vector<Tensor> gradients(const Var& loss, std::span<const Var> wrt) {
    auto grads = run_backward(loss);
    std::vector<Tensor> out;
    out.reserve(wrt.size());
    for (const Var& v : wrt) {
        auto it = grads.find(v.node().get());
        out.push_back(it == grads.end() ? Tensor(v.shape()) : it->second);
    }
    return out;
}

}  // namespace elcd::ad
