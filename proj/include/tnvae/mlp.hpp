#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnvae/error.hpp"
#include "tnvae/rng.hpp"

namespace tnvae {

enum class Activation { tanh, relu, identity };

inline std::string to_string(Activation a)
{
    switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s)
{
    if (s == "tanh")
        return Activation::tanh;
    if (s == "relu")
        return Activation::relu;
    if (s == "identity")
        return Activation::identity;
    throw ConfigError("unknown activation '" + s + "'");
}

template <typename Scalar>
struct DenseLayer {
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    MatrixType weight; // out x in
    VectorType bias;   // out

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

/// Ordered parameter list. Used for network parameters, their gradients and
/// optimizer accumulators alike, so all three always share one shape.
template <typename Scalar>
using LayerStack = std::vector<DenseLayer<Scalar>>;

template <typename Scalar>
LayerStack<Scalar> zeros_like(const LayerStack<Scalar>& like)
{
    LayerStack<Scalar> out(like.size());
    for (std::size_t i = 0; i < like.size(); ++i) {
        out[i].weight.setZero(like[i].weight.rows(), like[i].weight.cols());
        out[i].bias.setZero(like[i].bias.size());
    }
    return out;
}

template <typename Scalar>
bool same_shape(const LayerStack<Scalar>& a, const LayerStack<Scalar>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
            a[i].bias.size() != b[i].bias.size())
            return false;
    }
    return true;
}

template <typename Scalar>
class BasicMlp {
public:
    using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Layer = DenseLayer<Scalar>;

    BasicMlp() = default;

    BasicMlp(LayerStack<Scalar> layers, Activation hidden = Activation::tanh,
             Activation output = Activation::identity)
        : layers_(std::move(layers)), hidden_(hidden), output_(output)
    {
        if (layers_.empty())
            throw ShapeError("network needs at least one layer");
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Layer& l = layers_[i];
            if (l.bias.size() != l.weight.rows())
                throw ShapeError("layer " + std::to_string(i) + ": bias length != weight rows");
            if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
                throw ShapeError("layer " + std::to_string(i) + ": input dim " + std::to_string(l.weight.cols()) +
                                 " does not chain with previous output dim " +
                                 std::to_string(layers_[i - 1].weight.rows()));
            if (!l.weight.allFinite() || !l.bias.allFinite())
                throw NumericError("non-finite parameter", static_cast<int>(i));
        }
    }

    /// Glorot-uniform weights, zero biases. `dims` lists every layer width
    /// including input and output.
    static BasicMlp glorot(std::span<const Eigen::Index> dims, Activation hidden, RngStream& rng,
                           Activation output = Activation::identity)
    {
        if (dims.size() < 2)
            throw ShapeError("need at least input and output dimensions");
        LayerStack<Scalar> layers;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            const Eigen::Index in = dims[i], out = dims[i + 1];
            const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
            Layer l;
            l.weight.resize(out, in);
            for (Eigen::Index c = 0; c < in; ++c)
                for (Eigen::Index r = 0; r < out; ++r)
                    l.weight(r, c) = static_cast<Scalar>((2.0 * rng.uniform() - 1.0) * limit);
            l.bias.setZero(out);
            layers.push_back(std::move(l));
        }
        return BasicMlp(std::move(layers), hidden, output);
    }

    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }
    std::size_t num_layers() const { return layers_.size(); }

    Eigen::Index num_parameters() const
    {
        Eigen::Index n = 0;
        for (const Layer& l : layers_)
            n += l.weight.size() + l.bias.size();
        return n;
    }

    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }
    Activation activation_of(std::size_t layer) const { return layer + 1 == layers_.size() ? output_ : hidden_; }

    const LayerStack<Scalar>& layers() const { return layers_; }
    /// Mutable access for optimizers. Callers must keep shapes intact.
    LayerStack<Scalar>& parameters() { return layers_; }

private:
    LayerStack<Scalar> layers_;
    Activation hidden_ = Activation::tanh;
    Activation output_ = Activation::identity;
};

using Mlp = BasicMlp<double>;
using LayerGrads = LayerStack<double>;

namespace detail {

template <typename Derived>
void apply_activation(Eigen::MatrixBase<Derived>& m, Activation a)
{
    switch (a) {
    case Activation::tanh: m.derived() = m.array().tanh().matrix(); break;
    case Activation::relu: m.derived() = m.array().max(typename Derived::Scalar(0)).matrix(); break;
    case Activation::identity: break;
    }
}

/// Multiplies `grad` in place by the activation derivative, expressed in terms
/// of the activation output `h`.
template <typename Derived, typename OtherDerived>
void apply_activation_derivative(Eigen::MatrixBase<Derived>& grad, const Eigen::MatrixBase<OtherDerived>& h,
                                 Activation a)
{
    using Scalar = typename Derived::Scalar;
    switch (a) {
    case Activation::tanh: grad.array() *= (Scalar(1) - h.array().square()); break;
    case Activation::relu: grad.array() *= (h.array() > Scalar(0)).template cast<Scalar>(); break;
    case Activation::identity: break;
    }
}

} // namespace detail

/// Activations recorded during a batched forward pass. `values[0]` is the
/// input batch, `values[i + 1]` the post-activation output of layer i.
template <typename Scalar>
struct ForwardTrace {
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> values;

    const auto& output() const { return values.back(); }
};

/// Batched forward pass; each column of `batch` is one sample.
template <typename Scalar, typename Derived>
ForwardTrace<Scalar> forward_trace(const BasicMlp<Scalar>& net, const Eigen::MatrixBase<Derived>& batch)
{
    if (batch.rows() != net.input_dim())
        throw ShapeError("input has " + std::to_string(batch.rows()) + " rows, network expects " +
                         std::to_string(net.input_dim()));
    ForwardTrace<Scalar> trace;
    trace.values.reserve(net.num_layers() + 1);
    trace.values.emplace_back(batch);
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        typename BasicMlp<Scalar>::MatrixType a = layers[i].weight * trace.values.back();
        a.colwise() += layers[i].bias;
        detail::apply_activation(a, net.activation_of(i));
        if (!a.allFinite())
            throw NumericError("non-finite activation in layer " + std::to_string(i), static_cast<int>(i));
        trace.values.push_back(std::move(a));
    }
    return trace;
}

template <typename Scalar, typename Derived>
typename BasicMlp<Scalar>::MatrixType forward(const BasicMlp<Scalar>& net, const Eigen::MatrixBase<Derived>& batch)
{
    return std::move(forward_trace(net, batch).values.back());
}

/// Single-sample forward pass.
template <typename Scalar>
typename BasicMlp<Scalar>::VectorType mlp_forward(const BasicMlp<Scalar>& net,
                                                  const typename BasicMlp<Scalar>::VectorType& input)
{
    if (input.size() != net.input_dim())
        throw ShapeError("input length " + std::to_string(input.size()) + " != network input dim " +
                         std::to_string(net.input_dim()));
    return forward(net, input);
}

/// Reverse-mode pass. `output_grad` is dLoss/dOutput with the same shape as
/// the traced output. Returns parameter gradients; if `input_grad` is given it
/// receives dLoss/dInput.
template <typename Scalar, typename Derived>
LayerStack<Scalar> backward(const BasicMlp<Scalar>& net, const ForwardTrace<Scalar>& trace,
                            const Eigen::MatrixBase<Derived>& output_grad,
                            Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* input_grad = nullptr)
{
    using MatrixType = typename BasicMlp<Scalar>::MatrixType;
    const auto& layers = net.layers();
    if (trace.values.size() != layers.size() + 1)
        throw ShapeError("trace does not belong to this network");
    if (output_grad.rows() != trace.output().rows() || output_grad.cols() != trace.output().cols())
        throw ShapeError("output gradient shape does not match network output");

    LayerStack<Scalar> grads(layers.size());
    MatrixType delta = output_grad;
    for (std::size_t k = layers.size(); k-- > 0;) {
        detail::apply_activation_derivative(delta, trace.values[k + 1], net.activation_of(k));
        if (!delta.allFinite())
            throw NumericError("non-finite gradient in layer " + std::to_string(k), static_cast<int>(k));
        grads[k].weight.noalias() = delta * trace.values[k].transpose();
        grads[k].bias = delta.rowwise().sum();
        if (k > 0 || input_grad) {
            MatrixType next = layers[k].weight.transpose() * delta;
            delta = std::move(next);
        }
    }
    if (input_grad)
        *input_grad = std::move(delta);
    return grads;
}

/// Loss and exact gradient for a scalar loss of the network outputs.
/// `loss_fn(outputs)` must return `std::pair<Scalar, MatrixType>` holding the
/// loss and its derivative with respect to `outputs`.
template <typename Scalar, typename Derived, typename LossFn>
std::pair<Scalar, LayerStack<Scalar>> mlp_gradient(const BasicMlp<Scalar>& net, const Eigen::MatrixBase<Derived>& batch,
                                                   LossFn&& loss_fn)
{
    const ForwardTrace<Scalar> trace = forward_trace(net, batch);
    auto [loss, dout] = loss_fn(trace.output());
    if (!std::isfinite(static_cast<double>(loss)))
        throw NumericError("non-finite loss", static_cast<int>(net.num_layers()) - 1);
    return {loss, backward(net, trace, dout)};
}

} // namespace tnvae
