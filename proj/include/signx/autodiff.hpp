// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "signx/tensor.hpp"

namespace signx {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape. Ops append nodes in forward order, which is already a
// topological order, so the backward pass is a single reverse sweep. A tape
// belongs to one training thread.
class Tape {
public:
    Var leaf(Tensor value, bool requires_grad = false);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    // Internal: used by op implementations.
    Var make(Tensor value, std::vector<int> parents,
             std::function<void(Tape&, int)> back);

    const Tensor& val(const Var& v) const { return nodes_[v.id].value; }
    Tensor& adj(int id);
    bool needs_grad(int id) const { return nodes_[id].needs_grad; }
    const Tensor& node_val(int id) const { return nodes_[id].value; }

    // Accumulate g into the adjoint of node id (no-op if grad not required).
    void accumulate(int id, const Tensor& g);

    // Seeds the root with 1 and sweeps the tape in reverse creation order.
    void backward(const Var& root);

    // Gradient of the last backward() with respect to v.
    const Tensor& grad(const Var& v) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor adjoint;
        bool has_adjoint = false;
        bool needs_grad = false;
        std::vector<int> parents;
        std::function<void(Tape&, int)> back;
    };
    std::vector<Node> nodes_;
};

// ---- elementwise / arithmetic ----
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
Var add_const(Var a, double c);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);

// y = a * s and y = a / s for a scalar [1x1] variable s.
Var scale_by(Var a, Var s);
Var div_by(Var a, Var s);

// ---- reductions ----
Var sum(Var a);
Var mean(Var a);
Var mean_rows(Var a);  // [T x d] -> [1 x d]

// ---- linear algebra ----
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_row_broadcast(Var x, Var b);  // [m x n] + [1 x n]
Var mul_row_broadcast(Var x, Var s);  // [m x n] * [1 x n]

// ---- shaping ----
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_rows(Var a, std::size_t r0, std::size_t r1);
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
Var pad_cols(Var a, std::size_t new_cols);  // zero-pad on the right
Var gather_rows(Var table, const std::vector<int>& idx);
Var stopgrad(Var a);

// ---- normalization / attention ----
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gain, Var bias, double eps);
// Batch statistics over rows, per column; mean/var of the batch are exposed
// through batch_column_stats for running-average upkeep.
Var batch_norm_rows(Var x, Var gain, Var bias, double eps);
void batch_column_stats(const Tensor& x, std::vector<double>& mean, std::vector<double>& var);

// ---- sequence ops ----
Var max_pool2_rows(Var a);                    // window 2, stride 2, ceil
Var unfold_rows_replicate(Var a, std::size_t k);  // [T x C] -> [T x kC], edge-replicated

// Scalar convenience.
inline Var dot(Var a, Var b) { return sum(mul(a, b)); }

}  // namespace signx
