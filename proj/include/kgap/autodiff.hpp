#pragma once

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "kgap/tensor.hpp"

namespace kgap::ad {

template <typename T>
class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <typename T>
struct Var {
    Tape<T>* tape = nullptr;
    std::size_t id = 0;

    const Tensor<T>& value() const { return tape->value(id); }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

// Records a computation for reverse-mode differentiation. One tape per
// forward pass; not shared between threads.
template <typename T>
class Tape {
public:
    // Receives the gradient of the node's output and adds contributions to
    // its inputs through grad_of().
    using Backward = std::function<void(Tape&, const Tensor<T>&)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

    // Leaf bound to a parameter; backward() accumulates into its grad.
    // Repeated calls for the same parameter return the same node.
    Var<T> param(Parameter<T>& p) {
        if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
        auto v = push(p.value, true, nullptr);
        nodes_[v.id].param = &p;
        param_nodes_.emplace(&p, v.id);
        return v;
    }

    // Adds an op result. `needs_grad` should be true iff any input needs one.
    Var<T> push(Tensor<T> value, bool needs_grad, Backward backward) {
        nodes_.push_back(Node{std::move(value), {}, needs_grad ? std::move(backward) : Backward{}, needs_grad, nullptr});
        return {this, nodes_.size() - 1};
    }

    const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
    bool needs_grad(std::size_t id) const { return nodes_.at(id).needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Gradient buffer for a node, allocated on first use.
    Tensor<T>& grad_of(std::size_t id) {
        auto& n = nodes_[id];
        if (!n.grad.same_shape(n.value)) n.grad = Tensor<T>(n.value.rows(), n.value.cols());
        return n.grad;
    }

    // Reverse sweep from a 1x1 loss; parameter grads are accumulated (not
    // overwritten) so several tapes can contribute to one batch.
    void backward(Var<T> loss) {
        if (loss.tape != this) throw ContractViolation("loss belongs to a different tape");
        const auto& lv = value(loss.id);
        if (lv.rows() != 1 || lv.cols() != 1)
            throw ContractViolation("backward() needs a scalar loss, got " + lv.shape_string());
        grad_of(loss.id)[0] += T(1);
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.needs_grad || !n.grad.same_shape(n.value)) continue;
            if (n.backward) n.backward(*this, n.grad);
            if (n.param != nullptr) {
                if (!n.param->has_grad()) n.param->grad = Tensor<T>(n.value.rows(), n.value.cols());
                n.param->grad += n.grad;
            }
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        Backward backward;
        bool needs_grad = false;
        Parameter<T>* param = nullptr;
    };

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
};

// ---------------------------------------------------------------------------
// Ops. Axis 0 runs down the rows (result 1 x cols), axis 1 along the
// columns (result rows x 1). Shape mismatches throw DimensionError naming
// both shapes.

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);

// b may match a, be a 1 x cols row (broadcast over rows) or a 1 x 1 scalar.
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);

template <typename T> Var<T> concat(const std::vector<Var<T>>& parts, int axis);
template <typename T> Var<T> slice_rows(Var<T> a, std::size_t begin, std::size_t end);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t end);

template <typename T> Var<T> softmax(Var<T> a, int axis);
template <typename T> Var<T> log_softmax(Var<T> a, int axis);
// Gradient flows to the first maximal entry.
template <typename T> Var<T> max_reduce(Var<T> a, int axis);
template <typename T> Var<T> mean_reduce(Var<T> a, int axis);
template <typename T> Var<T> sum(Var<T> a);

template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> tanh(Var<T> a);

// Rows of `table` for each id; negative ids yield zero rows.
template <typename T> Var<T> embedding_lookup(Var<T> table, const std::vector<int>& ids);

// 1 x 1 element at (row, col).
template <typename T> Var<T> pick(Var<T> a, std::size_t row, std::size_t col);

// Mean over positions with mask[k] of the binary cross-entropy between
// sigmoid(logits[k]) and targets[k]. A 1 x n logits row; an empty mask
// gives a constant 0.
template <typename T>
Var<T> bce_with_logits(Var<T> logits, const std::vector<T>& targets, const std::vector<bool>& mask);

// Entries are 0 with probability p, 1/(1-p) otherwise.
template <typename T> Tensor<T> dropout_mask(std::size_t rows, std::size_t cols, double p, Rng& rng);

// Independent mask per entry in training mode, identity otherwise.
template <typename T> Var<T> dropout(Var<T> a, double p, bool training, Rng& rng);

}  // namespace kgap::ad
