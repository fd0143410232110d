#pragma once

#include <cmath>
#include <cstdint>

#include "tnvae/error.hpp"
#include "tnvae/mlp.hpp"

namespace tnvae {

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
class BasicAdamState {
public:
    BasicAdamState(const LayerStack<Scalar>& params, AdamOptions options)
        : first_moment(zeros_like(params)), second_moment(zeros_like(params)), options_(options)
    {
        if (!(options.lr > 0) || !(options.beta1 > 0 && options.beta1 < 1) ||
            !(options.beta2 > 0 && options.beta2 < 1) || !(options.eps > 0))
            throw ConfigError("invalid Adam options");
    }

    LayerStack<Scalar> first_moment;
    LayerStack<Scalar> second_moment;
    std::int64_t step_count = 0;

    const AdamOptions& options() const { return options_; }

private:
    AdamOptions options_;
};

using AdamState = BasicAdamState<double>;

/// One bias-corrected Adam update of `params` in place.
template <typename Scalar>
void adam_step(BasicAdamState<Scalar>& state, LayerStack<Scalar>& params, const LayerStack<Scalar>& grads)
{
    if (!same_shape(params, grads) || !same_shape(params, state.first_moment))
        throw ShapeError("Adam: parameter, gradient and state shapes differ");

    const AdamOptions& o = state.options();
    ++state.step_count;
    const Scalar b1 = static_cast<Scalar>(o.beta1);
    const Scalar b2 = static_cast<Scalar>(o.beta2);
    const Scalar bc1 = Scalar(1) - static_cast<Scalar>(std::pow(o.beta1, static_cast<double>(state.step_count)));
    const Scalar bc2 = Scalar(1) - static_cast<Scalar>(std::pow(o.beta2, static_cast<double>(state.step_count)));
    const Scalar lr = static_cast<Scalar>(o.lr);
    const Scalar eps = static_cast<Scalar>(o.eps);

    auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
        m.array() = b1 * m.array() + (Scalar(1) - b1) * g.array();
        v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
        p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
        update(params[i].weight, state.first_moment[i].weight, state.second_moment[i].weight, grads[i].weight);
        update(params[i].bias, state.first_moment[i].bias, state.second_moment[i].bias, grads[i].bias);
    }
}

} // namespace tnvae
