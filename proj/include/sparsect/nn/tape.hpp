#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "sparsect/nn/tensor.hpp"

namespace sparsect::nn {

template <class T>
class Tape;

/// Handle to a value recorded on a Tape.
template <class T>
class Var {
public:
    Var() = default;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    bool valid() const { return tape_ != nullptr; }
    Tape<T>& tape() const {
        if (!tape_) throw GraphError("use of an unbound Var");
        return *tape_;
    }
    std::size_t id() const { return id_; }
    const Tensor<T>& value() const { return tape().value(id_); }
    const Shape& shape() const { return value().shape(); }

private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records primitive operations in execution order for reverse-mode
/// differentiation. Nodes live in a deque so references to earlier values stay
/// valid while later nodes are appended.
template <class T>
class Tape {
public:
    /// Called during backward with the gradient flowing into the node's output
    /// and the output value itself.
    using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out, const Tensor<T>& out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> value) { return push(std::move(value), {}, false, nullptr); }
    Var<T> variable(Tensor<T> value) { return push(std::move(value), {}, true, nullptr); }

    /// Appends the output of a primitive. The node requires a gradient when any
    /// input does; otherwise the backward closure is dropped.
    Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward) {
        bool needs = false;
        for (const auto& in : inputs) {
            if (&in.tape() != this) throw GraphError("inputs recorded on different tapes");
            needs = needs || nodes_[in.id()].requires_grad;
        }
        return push(std::move(value), inputs, needs, needs ? std::move(backward) : nullptr);
    }

    const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(const Var<T>& v) const { return nodes_.at(v.id()).requires_grad; }

    /// Gradient buffer for `v`, allocated as zeros on first use; nullptr when
    /// `v` does not take part in differentiation.
    Tensor<T>* grad_sink(const Var<T>& v) {
        Node& node = nodes_.at(v.id());
        if (!node.requires_grad) return nullptr;
        if (node.grad.empty() && !node.value.empty()) node.grad = Tensor<T>(node.value.shape());
        return &node.grad;
    }

    /// Gradient accumulated for `v` by the last backward pass (zeros if none reached it).
    Tensor<T> gradient(const Var<T>& v) const {
        const Node& node = nodes_.at(v.id());
        if (node.grad.empty()) return Tensor<T>(node.value.shape());
        return node.grad;
    }

    void backward(const Var<T>& loss) {
        if (&loss.tape() != this) throw GraphError("backward: loss belongs to another tape");
        if (loss.value().size() != 1)
            throw GraphError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
        for (auto& n : nodes_) n.grad = Tensor<T>();
        Tensor<T>* seed = grad_sink(loss);
        if (!seed) return;
        (*seed)[0] = T(1);
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            Node& node = nodes_[i];
            if (node.backward && !node.grad.empty()) node.backward(*this, node.grad, node.value);
        }
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var<T> push(Tensor<T> value, const std::vector<Var<T>>&, bool requires_grad, BackwardFn fn) {
        nodes_.push_back(Node{std::move(value), Tensor<T>(), requires_grad, std::move(fn)});
        return Var<T>(this, nodes_.size() - 1);
    }

    std::deque<Node> nodes_;
};

}  // namespace sparsect::nn
