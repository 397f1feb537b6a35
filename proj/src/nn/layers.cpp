#include "elcd/nn/layers.hpp"

#include <cmath>

namespace elcd::nn {

using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

Tensor init_tensor(Shape shape, std::size_t fan_in, Rng& rng, Init init, double range) {
    Tensor t(std::move(shape));
    if (init == Init::Zero) return t;
    const double bound = init == Init::Uniform ? range : 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.values()) v = uniform(rng, -bound, bound);
    return t;
}

}  // namespace

Dense::Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng, Init init, double range)
    : weight_(name + ".weight", init_tensor(Shape{out, in}, in, rng, init, range)),
      bias_(name + ".bias", init_tensor(Shape{out}, in, rng, init, range)) {}

void Dense::collect(ad::ParameterRefs& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

Mlp::Mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
         Init output_init, double output_range) {
    std::size_t prev = in;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        layers_.emplace_back(name + ".layer" + std::to_string(i), prev, hidden[i], rng);
        prev = hidden[i];
    }
    layers_.emplace_back(name + ".layer" + std::to_string(hidden.size()), prev, out, rng, output_init, output_range);
}

Var Mlp::operator()(const Var& x) const {
    Var h = x;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = ad::tanh(layers_[i](h));
    return layers_.back()(h);
}

void Mlp::collect(ad::ParameterRefs& out) {
    for (Dense& l : layers_) l.collect(out);
}

ResidualNet::ResidualNet(const std::string& name, std::size_t in, std::size_t width, std::size_t blocks,
                         std::size_t out, Rng& rng)
    : input_(name + ".input", in, width, rng), output_(name + ".output", width, out, rng, Init::Zero) {
    for (std::size_t b = 0; b < blocks; ++b) {
        block_layers_.emplace_back(name + ".block" + std::to_string(b) + ".0", width, width, rng);
        block_layers_.emplace_back(name + ".block" + std::to_string(b) + ".1", width, width, rng);
    }
}

Var ResidualNet::operator()(const Var& x) const {
    Var h = input_(x);
    for (std::size_t i = 0; i < block_layers_.size(); i += 2) {
        Var t = block_layers_[i](ad::tanh(h));
        t = block_layers_[i + 1](ad::tanh(t));
        h = ad::add(h, t);
    }
    return output_(h);
}

Dual ResidualNet::operator()(const Dual& x) const {
    Dual h = input_(x);
    for (std::size_t i = 0; i < block_layers_.size(); i += 2) {
        Dual t = block_layers_[i](dual::tanh(h));
        t = block_layers_[i + 1](dual::tanh(t));
        h = dual::add(h, t);
    }
    return output_(h);
}

void ResidualNet::collect(ad::ParameterRefs& out) {
    input_.collect(out);
    for (Dense& l : block_layers_) l.collect(out);
    output_.collect(out);
}

}  // namespace elcd::nn
