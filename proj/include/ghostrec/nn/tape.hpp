#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ghostrec/nn/layers.hpp"
#include "ghostrec/nn/matrix.hpp"
#include "ghostrec/nn/ops.hpp"

namespace ghostrec::nn {

// Whether a parameterised op accumulates gradients into its parameters.
// Skip is used when the parameters belong to a frozen network.
enum class ParamGrad { Accumulate, Skip };

// Reverse-mode recorder for a fixed feed-forward graph.
//
// Each op appends a node holding its output and a closure that maps the
// node's output gradient to input and parameter gradients. backward() walks
// the nodes once in reverse order. Parameter gradients are added to
// Param::grad, so callers zero them before a step.
//
// Parameters referenced by the tape must outlive it and must not move.
template <class T>
class Tape {
public:
    struct Var {
        std::size_t id = static_cast<std::size_t>(-1);
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf without gradient tracking.
    Var constant(Matrix<T> value);
    // Leaf whose gradient is kept and can be read after backward().
    Var variable(Matrix<T> value);

    Var dense(Var x, DenseParams<T>& p, ParamGrad track = ParamGrad::Accumulate);
    Var activation(Var x, Activation act);
    Var softmax(Var x);
    Var batchnorm(Var x, BatchNormParams<T>& p, BatchNormMode mode, ParamGrad track = ParamGrad::Accumulate,
                  bool update_running = true);
    // [left | right] along columns.
    Var concat(Var left, Var right);

    // Scalar (1x1) reductions.
    Var bce(Var pred, std::span<const T> targets);
    Var cce(Var probs, std::span<const int> labels);
    Var sum(Var x);
    // sum(x .* weights); weights has x's shape.
    Var dot(Var x, const Matrix<T>& weights);
    // wa * a + wb * b for 1x1 operands.
    Var combine(Var a, T wa, Var b, T wb);

    const Matrix<T>& value(Var v) const;
    // Gradient of the last backward() seed with respect to v. Zero-sized when
    // no gradient reached v.
    const Matrix<T>& grad(Var v) const;
    T scalar(Var v) const;

    // Runs the reverse pass from a 1x1 node. Throws TapeError when the tape is
    // empty, the node is not scalar or the tape was already replayed.
    void backward(Var loss, T seed = T(1));

    std::size_t size() const { return nodes_.size(); }
    bool replayed() const { return replayed_; }
    // Node ids in the order the last backward() visited them.
    const std::vector<std::size_t>& visit_order() const { return visits_; }
    // Hash of every piecewise branch taken so far (LeakyReLU sign, loss
    // clamping). Two passes with equal signatures ran on the same smooth piece.
    std::uint64_t branch_signature() const { return signature_; }
    void clear();

private:
    using Backward = std::function<void(Tape&, std::size_t)>;

    struct Node {
        Matrix<T> value;
        Matrix<T> grad;
        bool requires_grad = false;
        std::string op;
        Backward backward;
    };

    Var push(std::string op, Matrix<T> value, bool requires_grad, Backward backward);
    const Node& node(Var v) const;
    bool needs(Var v) const { return nodes_[v.id].requires_grad; }
    void accumulate(std::size_t id, const Matrix<T>& g);
    void note_branch(bool taken);
    void note_clamp(T v);

    static constexpr std::uint64_t kSignatureSeed = 0xcbf29ce484222325ull;

    std::vector<Node> nodes_;
    std::vector<std::size_t> visits_;
    bool replayed_ = false;
    std::uint64_t signature_ = kSignatureSeed;
};

}  // namespace ghostrec::nn
