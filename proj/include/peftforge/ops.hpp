#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "peftforge/tensor.hpp"

// Differentiable primitives as free functions. Every op computes its forward
// value eagerly and, when the output can reach a trainable tensor, records a
// backward rule on the graph. Matrices are row-major; rank-1 tensors act as
// column vectors.

namespace peftforge {

namespace detail {

template <typename S>
inline void require_matrix(const Tensor<S>& t, const char* who) {
    if (t.rank() > 2)
        throw ShapeError(std::string(who) + ": expected rank <= 2, got " + shape_str(t.shape()));
}

template <typename S>
inline void require_rank2(const Tensor<S>& t, const char* who) {
    if (t.rank() != 2)
        throw ShapeError(std::string(who) + ": expected rank 2, got " + shape_str(t.shape()));
}

}  // namespace detail

template <typename S>
Tensor<S> matmul(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " * " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::matrix(a.rows(), b.cols());
    out.mat().noalias() = a.mat() * b.mat();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        a.accumulate_grad(grad * b.mat().transpose());
        b.accumulate_grad(a.mat().transpose() * grad);
    });
    return out;
}

template <typename S>
Tensor<S> transpose(Graph<S>& g, const Tensor<S>& x) {
    detail::require_matrix(x, "transpose");
    Tensor<S> out = Tensor<S>::matrix(x.cols(), x.rows());
    out.mat() = x.mat().transpose();
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad(out.grad_mat().transpose());
    });
    return out;
}

/// Kronecker product of two rank-2 tensors: out[i*p+r, j*q+c] = a(i,j)*b(r,c).
template <typename S>
Tensor<S> kron(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_rank2(a, "kron");
    detail::require_rank2(b, "kron");
    const Index m = a.rows(), n = a.cols(), p = b.rows(), q = b.cols();
    Tensor<S> out = Tensor<S>::matrix(m * p, n * q);
    auto om = out.mat();
    for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) om.block(i * p, j * q, p, q) = a.at(i, j) * b.mat();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out, m = m, n = n, p = p, q = q]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        if (a.needs_grad()) {
            a.ensure_grad();
            auto ag = a.grad_mat();
            for (Index i = 0; i < m; ++i)
                for (Index j = 0; j < n; ++j)
                    ag(i, j) += (grad.block(i * p, j * q, p, q).array() * b.mat().array()).sum();
        }
        if (b.needs_grad()) {
            b.ensure_grad();
            auto bg = b.grad_mat();
            for (Index i = 0; i < m; ++i)
                for (Index j = 0; j < n; ++j) bg += a.at(i, j) * grad.block(i * p, j * q, p, q);
        }
    });
    return out;
}

/// out[i, j] = s[i] * x[i, j]; the per-row Hadamard scaling of prompt rows.
template <typename S>
Tensor<S> row_scale(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& s) {
    detail::require_rank2(x, "row_scale");
    if (s.numel() != x.rows() || s.cols() != 1)
        throw ShapeError("row_scale: scale " + shape_str(s.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(x.rows(), x.cols());
    out.mat() = x.mat().array().colwise() * s.mat().col(0).array();
    detail::record_op(g, out, {x, s}, [x = x, s = s, out = out]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        x.accumulate_grad((grad.array().colwise() * s.mat().col(0).array()).matrix());
        s.accumulate_grad((grad.array() * x.mat().array()).rowwise().sum().matrix());
    });
    return out;
}

/// out[i, j] = v[j] * x[i, j]; column-broadcast rescale (the IA3 primitive).
template <typename S>
Tensor<S> col_scale(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& v) {
    detail::require_rank2(x, "col_scale");
    if (v.numel() != x.cols())
        throw ShapeError("col_scale: scale " + shape_str(v.shape()) + " does not match cols of " +
                         shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(x.rows(), x.cols());
    out.mat() = x.mat().array().rowwise() * v.mat().reshaped().transpose().array();
    detail::record_op(g, out, {x, v}, [x = x, v = v, out = out]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        x.accumulate_grad((grad.array().rowwise() * v.mat().reshaped().transpose().array()).matrix());
        if (v.needs_grad()) {
            v.ensure_grad();
            Eigen::Array<S, 1, Eigen::Dynamic> colsum = (grad.array() * x.mat().array()).colwise().sum();
            v.grad() += colsum.transpose();
        }
    });
    return out;
}

/// out = s * x for a 1-element tensor s (trainable scalar gates and scales).
template <typename S>
Tensor<S> scalar_scale(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& s) {
    if (s.numel() != 1)
        throw ShapeError("scalar_scale: expected 1-element scale, got " + shape_str(s.shape()));
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.value() = x.value() * s.value()[0];
    detail::record_op(g, out, {x, s}, [x = x, s = s, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(out.grad() * s.value()[0]);
        if (s.needs_grad()) {
            s.ensure_grad();
            s.grad()[0] += (out.grad() * x.value()).sum();
        }
    });
    return out;
}

/// Row-wise softmax with max subtraction.
template <typename S>
Tensor<S> softmax_rows(Graph<S>& g, const Tensor<S>& x) {
    detail::require_rank2(x, "softmax_rows");
    if (!x.value().isFinite().all()) throw NumericError("softmax_rows: non-finite input");
    Tensor<S> out = Tensor<S>::matrix(x.rows(), x.cols());
    auto om = out.mat();
    for (Index i = 0; i < x.rows(); ++i) {
        const S m = x.mat().row(i).maxCoeff();
        om.row(i) = (x.mat().row(i).array() - m).exp();
        om.row(i) /= om.row(i).sum();
    }
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        auto y = out.mat();
        for (Index i = 0; i < y.rows(); ++i) {
            const S dot = grad.row(i).dot(y.row(i));
            x.accumulate_grad_row(i, (y.row(i).array() * (grad.row(i).array() - dot)).matrix());
        }
    });
    return out;
}

template <typename S>
Tensor<S> add(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("add: shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    out.value() = a.value() + b.value();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        a.accumulate_grad_flat(out.grad());
        b.accumulate_grad_flat(out.grad());
    });
    return out;
}

template <typename S>
Tensor<S> subtract(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("subtract: shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    out.value() = a.value() - b.value();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        a.accumulate_grad_flat(out.grad());
        b.accumulate_grad_flat(-out.grad());
    });
    return out;
}

template <typename S>
Tensor<S> multiply(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ShapeError("multiply: shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::zeros(a.shape());
    out.value() = a.value() * b.value();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        a.accumulate_grad_flat(out.grad() * b.value());
        b.accumulate_grad_flat(out.grad() * a.value());
    });
    return out;
}

template <typename S>
Tensor<S> relu(Graph<S>& g, const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.value() = x.value().max(S(0));
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(out.grad() * (x.value() > S(0)).template cast<S>());
    });
    return out;
}

template <typename S>
Tensor<S> sigmoid(Graph<S>& g, const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.value() = x.value().unaryExpr([](S v) {
        return v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                         : std::exp(v) / (S(1) + std::exp(v));
    });
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(out.grad() * out.value() * (S(1) - out.value()));
    });
    return out;
}

inline constexpr double kRmsNormEps = 1e-6;

/// y[i, :] = gain ⊙ x[i, :] / sqrt(mean(x[i, :]^2) + eps).
template <typename S>
Tensor<S> rms_norm(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& gain) {
    detail::require_rank2(x, "rms_norm");
    if (gain.numel() != x.cols())
        throw ShapeError("rms_norm: gain " + shape_str(gain.shape()) + " does not match cols of " +
                         shape_str(x.shape()));
    const Index n = x.cols();
    Tensor<S> out = Tensor<S>::matrix(x.rows(), n);
    ColArray<S> inv_rms(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const S ms = x.mat().row(i).squaredNorm() / S(n);
        inv_rms[i] = S(1) / std::sqrt(ms + S(kRmsNormEps));
        out.mat().row(i) =
            (x.mat().row(i).array() * inv_rms[i]) * gain.mat().reshaped().transpose().array();
    }
    detail::record_op(g, out, {x, gain}, [x = x, gain = gain, out = out, inv_rms = inv_rms, n = n]() mutable {
        if (!out.has_grad()) return;
        auto grad = out.grad_mat();
        for (Index i = 0; i < x.rows(); ++i) {
            // gt = dL/du for u = x / rms (the pre-gain normalized row)
            Eigen::Matrix<S, 1, Eigen::Dynamic> gt =
                (grad.row(i).array() * gain.mat().reshaped().transpose().array()).matrix();
            const S r_inv = inv_rms[i];
            const S proj = gt.dot(x.mat().row(i)) * r_inv * r_inv * r_inv / S(n);
            x.accumulate_grad_row(i, (gt.array() * r_inv - x.mat().row(i).array() * proj).matrix());
            if (gain.needs_grad()) {
                gain.ensure_grad();
                Eigen::Array<S, 1, Eigen::Dynamic> gg =
                    grad.row(i).array() * x.mat().row(i).array() * r_inv;
                gain.grad() += gg.transpose();
            }
        }
    });
    return out;
}

/// Row gather with scatter-add backward.
template <typename S>
Tensor<S> embedding_lookup(Graph<S>& g, const Tensor<S>& table, const std::vector<int32_t>& ids) {
    detail::require_rank2(table, "embedding_lookup");
    const Index vocab = table.rows();
    for (size_t t = 0; t < ids.size(); ++t)
        if (ids[t] < 0 || ids[t] >= vocab)
            throw IndexError("embedding_lookup: id " + std::to_string(ids[t]) + " at position " +
                             std::to_string(t) + " outside table of " + std::to_string(vocab) +
                             " rows");
    Tensor<S> out = Tensor<S>::matrix(static_cast<Index>(ids.size()), table.cols());
    for (size_t t = 0; t < ids.size(); ++t)
        out.mat().row(static_cast<Index>(t)) = table.mat().row(ids[t]);
    detail::record_op(g, out, {table}, [table = table, out = out, ids = ids]() mutable {
        if (!out.has_grad()) return;
        table.ensure_grad();
        auto tg = table.grad_mat();
        for (size_t t = 0; t < ids.size(); ++t)
            tg.row(ids[t]) += out.grad_mat().row(static_cast<Index>(t));
    });
    return out;
}

/// Vertical stack; the "[·;·]" composition.
template <typename S>
Tensor<S> concat_rows(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_rank2(a, "concat_rows");
    detail::require_rank2(b, "concat_rows");
    if (a.cols() != b.cols())
        throw ShapeError("concat_rows: widths disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::matrix(a.rows() + b.rows(), a.cols());
    out.mat().topRows(a.rows()) = a.mat();
    out.mat().bottomRows(b.rows()) = b.mat();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        a.accumulate_grad(out.grad_mat().topRows(a.rows()));
        b.accumulate_grad(out.grad_mat().bottomRows(b.rows()));
    });
    return out;
}

template <typename S>
Tensor<S> concat_cols(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& b) {
    detail::require_rank2(a, "concat_cols");
    detail::require_rank2(b, "concat_cols");
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: heights disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    Tensor<S> out = Tensor<S>::matrix(a.rows(), a.cols() + b.cols());
    out.mat().leftCols(a.cols()) = a.mat();
    out.mat().rightCols(b.cols()) = b.mat();
    detail::record_op(g, out, {a, b}, [a = a, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        a.accumulate_grad(out.grad_mat().leftCols(a.cols()));
        b.accumulate_grad(out.grad_mat().rightCols(b.cols()));
    });
    return out;
}

template <typename S>
Tensor<S> slice_rows(Graph<S>& g, const Tensor<S>& x, Index begin, Index count) {
    detail::require_rank2(x, "slice_rows");
    if (begin < 0 || count < 0 || begin + count > x.rows())
        throw IndexError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(count, x.cols());
    out.mat() = x.mat().middleRows(begin, count);
    detail::record_op(g, out, {x}, [x = x, out = out, begin = begin, count = count]() mutable {
        if (!out.has_grad()) return;
        if (!x.needs_grad()) return;
        x.ensure_grad();
        x.grad_mat().middleRows(begin, count) += out.grad_mat();
    });
    return out;
}

template <typename S>
Tensor<S> slice_cols(Graph<S>& g, const Tensor<S>& x, Index begin, Index count) {
    detail::require_rank2(x, "slice_cols");
    if (begin < 0 || count < 0 || begin + count > x.cols())
        throw IndexError("slice_cols: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(x.rows(), count);
    out.mat() = x.mat().middleCols(begin, count);
    detail::record_op(g, out, {x}, [x = x, out = out, begin = begin, count = count]() mutable {
        if (!out.has_grad()) return;
        if (!x.needs_grad()) return;
        x.ensure_grad();
        x.grad_mat().middleCols(begin, count) += out.grad_mat();
    });
    return out;
}

/// Row-major reinterpretation; element order is preserved.
template <typename S>
Tensor<S> reshape(Graph<S>& g, const Tensor<S>& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                         " changes element count");
    Tensor<S> out = Tensor<S>::zeros(std::move(shape));
    out.value() = x.value();
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(out.grad());
    });
    return out;
}

/// x + row-broadcast bias (bias has one entry per column).
template <typename S>
Tensor<S> add_rowvec(Graph<S>& g, const Tensor<S>& x, const Tensor<S>& b) {
    detail::require_rank2(x, "add_rowvec");
    if (b.numel() != x.cols())
        throw ShapeError("add_rowvec: bias " + shape_str(b.shape()) + " does not match cols of " +
                         shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(x.rows(), x.cols());
    out.mat() = x.mat().rowwise() + b.mat().reshaped().transpose();
    detail::record_op(g, out, {x, b}, [x = x, b = b, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad(out.grad_mat());
        if (b.needs_grad()) {
            b.ensure_grad();
            Eigen::Array<S, 1, Eigen::Dynamic> colsum = out.grad_mat().colwise().sum().array();
            b.grad() += colsum.transpose();
        }
    });
    return out;
}

/// Column-wise mean over rows: [t x n] -> [1 x n].
template <typename S>
Tensor<S> mean_rows(Graph<S>& g, const Tensor<S>& x) {
    detail::require_rank2(x, "mean_rows");
    if (x.rows() == 0) throw ContractError("mean_rows on empty tensor");
    Tensor<S> out = Tensor<S>::matrix(1, x.cols());
    out.mat() = x.mat().colwise().mean();
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        if (!x.needs_grad()) return;
        x.ensure_grad();
        x.grad_mat().rowwise() += out.grad_mat().row(0) / S(x.rows());
    });
    return out;
}

template <typename S>
Tensor<S> sum_all(Graph<S>& g, const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::scalar(x.value().sum());
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(ColArray<S>::Constant(x.numel(), out.grad()[0]));
    });
    return out;
}

template <typename S>
Tensor<S> scale_const(Graph<S>& g, const Tensor<S>& x, S c) {
    Tensor<S> out = Tensor<S>::zeros(x.shape());
    out.value() = x.value() * c;
    detail::record_op(g, out, {x}, [x = x, out = out, c = c]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad_flat(out.grad() * c);
    });
    return out;
}

/// x + fixed matrix (attention masks); no gradient flows into the constant.
template <typename S>
Tensor<S> add_constant(Graph<S>& g, const Tensor<S>& x, const MatrixR<S>& c) {
    detail::require_rank2(x, "add_constant");
    if (c.rows() != x.rows() || c.cols() != x.cols())
        throw ShapeError("add_constant: constant " + std::to_string(c.rows()) + "x" +
                         std::to_string(c.cols()) + " does not match " + shape_str(x.shape()));
    Tensor<S> out = Tensor<S>::matrix(x.rows(), x.cols());
    out.mat() = x.mat() + c;
    detail::record_op(g, out, {x}, [x = x, out = out]() mutable {
        if (!out.has_grad()) return;
        x.accumulate_grad(out.grad_mat());
    });
    return out;
}

namespace detail {

template <typename S>
Tensor<S> cross_entropy_impl(Graph<S>& g, const Tensor<S>& logits,
                             const std::vector<int32_t>& targets, int32_t ignore_id, bool mean,
                             Index* kept_out) {
    require_rank2(logits, "cross_entropy_from_logits");
    if (static_cast<Index>(targets.size()) != logits.rows())
        throw ShapeError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_str(logits.shape()));
    const Index vocab = logits.cols();
    Index kept = 0;
    for (size_t t = 0; t < targets.size(); ++t) {
        if (targets[t] == ignore_id) continue;
        if (targets[t] < 0 || targets[t] >= vocab)
            throw IndexError("cross_entropy_from_logits: target id " + std::to_string(targets[t]) +
                             " at position " + std::to_string(t) + " outside vocab of " +
                             std::to_string(vocab));
        ++kept;
    }
    if (kept == 0) throw ContractError("cross_entropy_from_logits: every target is padding");
    if (kept_out) *kept_out = kept;

    S total = S(0);
    for (Index i = 0; i < logits.rows(); ++i) {
        if (targets[static_cast<size_t>(i)] == ignore_id) continue;
        const S m = logits.mat().row(i).maxCoeff();
        const S lse = m + std::log((logits.mat().row(i).array() - m).exp().sum());
        total += lse - logits.at(i, targets[static_cast<size_t>(i)]);
    }
    Tensor<S> out = Tensor<S>::scalar(mean ? total / S(kept) : total);
    const S unit = mean ? S(1) / S(kept) : S(1);
    detail::record_op(g, out, {logits}, [logits = logits, out = out, targets = targets, ignore_id = ignore_id, unit = unit]() mutable {
        if (!out.has_grad()) return;
        if (!logits.needs_grad()) return;
        logits.ensure_grad();
        const S gscale = out.grad()[0] * unit;
        auto lg = logits.grad_mat();
        for (Index i = 0; i < logits.rows(); ++i) {
            const int32_t target = targets[static_cast<size_t>(i)];
            if (target == ignore_id) continue;
            const S m = logits.mat().row(i).maxCoeff();
            Eigen::Array<S, 1, Eigen::Dynamic> p = (logits.mat().row(i).array() - m).exp();
            p /= p.sum();
            p[target] -= S(1);
            lg.row(i) += gscale * p.matrix();
        }
    });
    return out;
}

}  // namespace detail

/// Mean cross-entropy over the non-ignored target positions.
template <typename S>
Tensor<S> cross_entropy_from_logits(Graph<S>& g, const Tensor<S>& logits,
                                    const std::vector<int32_t>& targets, int32_t ignore_id = -1) {
    return detail::cross_entropy_impl(g, logits, targets, ignore_id, /*mean=*/true, nullptr);
}

/// Summed token cross-entropy plus the kept-position count, for exact
/// whole-batch averaging across several sequences.
template <typename S>
Tensor<S> cross_entropy_sum_from_logits(Graph<S>& g, const Tensor<S>& logits,
                                        const std::vector<int32_t>& targets, int32_t ignore_id,
                                        Index* kept_out) {
    return detail::cross_entropy_impl(g, logits, targets, ignore_id, /*mean=*/false, kept_out);
}

/// Clears the accumulated gradients of a parameter collection.
template <typename Map>
void zero_grads(Map& params) {
    for (auto& [name, t] : params) t.clear_grad();
}

}  // namespace peftforge
