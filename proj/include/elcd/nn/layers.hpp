#pragma once

#include <string>
#include <vector>

#include "elcd/autodiff/ops.hpp"
#include "elcd/nn/dual.hpp"
#include "elcd/random.hpp"

namespace elcd::nn {

enum class Init {
    FanIn,  // U(-1/sqrt(in), 1/sqrt(in)) weights and biases
    Zero,
    Uniform,  // U(-range, range) weights and biases
};

/// Affine map x W^T + b on a batch of rows.
class Dense {
public:
    Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng, Init init = Init::FanIn,
          double range = 0.0);

    ad::Var operator()(const ad::Var& x) const { return ad::linear(x, weight_.var(), bias_.var()); }
    Dual operator()(const Dual& x) const { return dual::linear(x, weight_.var(), bias_.var()); }

    std::size_t in() const { return weight_.value().dim(1); }
    std::size_t out() const { return weight_.value().dim(0); }
    void collect(ad::ParameterRefs& out);

private:
    ad::Parameter weight_;
    ad::Parameter bias_;
};

/// Fully connected tanh network. The output layer is linear.
class Mlp {
public:
    Mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
        Init output_init = Init::FanIn, double output_range = 0.0);

    ad::Var operator()(const ad::Var& x) const;
    std::size_t in() const { return layers_.front().in(); }
    std::size_t out() const { return layers_.back().out(); }
    void collect(ad::ParameterRefs& out);

private:
    std::vector<Dense> layers_;
};

/// Residual conditioner: input projection, `blocks` pre-activation residual
/// blocks of width `width`, and a zero-initialized output projection.
class ResidualNet {
public:
    ResidualNet(const std::string& name, std::size_t in, std::size_t width, std::size_t blocks, std::size_t out,
                Rng& rng);

    ad::Var operator()(const ad::Var& x) const;
    Dual operator()(const Dual& x) const;
    void collect(ad::ParameterRefs& out);

private:
    Dense input_;
    std::vector<Dense> block_layers_;  // two per block
    Dense output_;
};

}  // namespace elcd::nn
