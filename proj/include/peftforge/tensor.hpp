#pragma once

#include <Eigen/Dense>

#include <functional>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "peftforge/errors.hpp"

namespace peftforge {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

template <typename S>
using ColArray = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<MatrixR<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const MatrixR<S>>;

inline Index shape_numel(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

template <typename S>
struct TensorNode {
    Shape shape;
    ColArray<S> value;
    ColArray<S> grad;       // size 0 while absent
    bool trainable = false;
    bool needs_grad = false;  // trainable, or downstream of a trainable tensor
};

}  // namespace detail

/// Dense row-major tensor with an optional gradient buffer. A Tensor is a
/// cheap shared handle: copies alias the same storage, which is what lets
/// backward closures reach the buffers they must update.
template <typename S>
class Tensor {
  public:
    using Scalar = S;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode<S>>();
        t.node_->value = ColArray<S>::Zero(shape_numel(shape));
        t.node_->shape = std::move(shape);
        return t;
    }

    static Tensor full(Shape shape, S fill) {
        Tensor t = zeros(std::move(shape));
        t.node_->value.setConstant(fill);
        return t;
    }

    static Tensor from_values(Shape shape, std::vector<S> values) {
        if (static_cast<Index>(values.size()) != shape_numel(shape))
            throw ShapeError("tensor init: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape));
        Tensor t = zeros(std::move(shape));
        for (Index i = 0; i < t.numel(); ++i) t.node_->value[i] = values[static_cast<size_t>(i)];
        return t;
    }

    static Tensor matrix(Index rows, Index cols) { return zeros({rows, cols}); }

    static Tensor scalar(S v) { return full({1}, v); }

    static Tensor from_eigen(const MatrixR<S>& m) {
        Tensor t = zeros({m.rows(), m.cols()});
        t.mat() = m;
        return t;
    }

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    Index rank() const { return static_cast<Index>(node_->shape.size()); }
    Index numel() const { return node_->value.size(); }
    bool is_scalar() const { return numel() == 1 && rank() <= 1; }

    Index rows() const {
        require_rank_le2("rows()");
        return rank() == 2 ? shape()[0] : numel();
    }
    Index cols() const {
        require_rank_le2("cols()");
        return rank() == 2 ? shape()[1] : 1;
    }

    ColArray<S>& value() { return node_->value; }
    const ColArray<S>& value() const { return node_->value; }

    /// Rank-2 (or column for rank-1) view over the row-major storage.
    MatMap<S> mat() {
        require_rank_le2("mat()");
        return MatMap<S>(node_->value.data(), rows(), cols());
    }
    ConstMatMap<S> mat() const {
        require_rank_le2("mat()");
        return ConstMatMap<S>(node_->value.data(), rows(), cols());
    }

    S& at(Index r, Index c) { return node_->value[r * cols() + c]; }
    S at(Index r, Index c) const { return node_->value[r * cols() + c]; }
    S item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    bool trainable() const { return node_->trainable; }
    void set_trainable(bool on) {
        node_->trainable = on;
        if (on) node_->needs_grad = true;
        if (!on) node_->needs_grad = false;
    }

    bool needs_grad() const { return node_->needs_grad; }
    void mark_needs_grad() { node_->needs_grad = true; }

    bool has_grad() const { return node_->grad.size() > 0; }
    ColArray<S>& grad() {
        if (!has_grad()) throw ContractError("gradient absent on tensor " + shape_str(shape()));
        return node_->grad;
    }
    const ColArray<S>& grad() const {
        if (!has_grad()) throw ContractError("gradient absent on tensor " + shape_str(shape()));
        return node_->grad;
    }
    MatMap<S> grad_mat() {
        require_rank_le2("grad_mat()");
        return MatMap<S>(grad().data(), rows(), cols());
    }

    void ensure_grad() {
        if (!has_grad()) node_->grad = ColArray<S>::Zero(numel());
    }
    void clear_grad() { node_->grad.resize(0); }

    /// Gradient accumulation entry point used by backward rules; silently
    /// skips tensors outside every trainable path.
    template <typename Expr>
    void accumulate_grad(const Expr& g) {
        if (!node_->needs_grad) return;
        ensure_grad();
        MatMap<S>(node_->grad.data(), rows(), cols()) += g;
    }
    template <typename Expr>
    void accumulate_grad_flat(const Expr& g) {
        if (!node_->needs_grad) return;
        ensure_grad();
        node_->grad += g;
    }
    template <typename Expr>
    void accumulate_grad_row(Index r, const Expr& g) {
        if (!node_->needs_grad) return;
        ensure_grad();
        MatMap<S>(node_->grad.data(), rows(), cols()).row(r) += g;
    }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

  private:
    void require_rank_le2(const char* what) const {
        if (rank() > 2)
            throw ShapeError(std::string(what) + " requires rank <= 2, got " + shape_str(shape()));
    }

    std::shared_ptr<detail::TensorNode<S>> node_;
};

/// Reverse-mode tape. Operations append one node each, so the node order is
/// a topological order of the computation by construction. A graph and its
/// tensors are confined to one worker.
template <typename S>
class Graph {
  public:
    explicit Graph(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void push(Tensor<S> output, std::function<void()> backward) {
        nodes_.push_back(Node{std::move(output), std::move(backward)});
    }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
    /// of intermediate (op-produced) tensors are rebuilt from scratch on
    /// every call; leaf gradients accumulate across calls until cleared.
    void backward(Tensor<S> loss) {
        if (loss.numel() != 1)
            throw ContractError("backward expects a scalar loss, got " + shape_str(loss.shape()));
        if (!std::isfinite(static_cast<double>(loss.value()[0])))
            throw NumericError("backward on non-finite loss");
        for (auto& n : nodes_) n.output.clear_grad();
        if (!loss.needs_grad()) return;  // loss not reachable from any trainable tensor
        loss.ensure_grad();
        loss.grad()[0] += S(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
    }

  private:
    struct Node {
        Tensor<S> output;
        std::function<void()> backward;
    };
    bool recording_ = true;
    std::vector<Node> nodes_;
};

namespace detail {

/// Finalizes an op: propagates needs_grad from parents and records the
/// backward rule. Subgraphs that cannot reach a trainable tensor are never
/// recorded, which makes frozen-backbone training cheap.
template <typename S, typename F>
void record_op(Graph<S>& g, Tensor<S>& out, std::initializer_list<Tensor<S>> parents, F&& back) {
    if (!g.recording()) return;
    bool need = false;
    for (const auto& p : parents) need = need || p.needs_grad();
    if (!need) return;
    out.mark_needs_grad();
    g.push(out, std::forward<F>(back));
}

}  // namespace detail

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace peftforge
