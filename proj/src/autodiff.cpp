// SPDX-License-Identifier: Apache-2.0
#include "signx/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace signx {

namespace {

void check_same_tape(const Var& a, const Var& b) {
    if (a.tape != b.tape) throw std::logic_error("autodiff: variables from different tapes");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string("dimension error: ") + op + " on " +
                                    a.shape_str() + " vs " + b.shape_str());
}

void add_into(Tensor& dst, const Tensor& src) {
    double* d = dst.data();
    const double* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> back) {
    Node n;
    n.value = std::move(value);
    for (int p : parents)
        if (nodes_[p].needs_grad) n.needs_grad = true;
    n.parents = std::move(parents);
    if (n.needs_grad) n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Tensor& Tape::adj(int id) {
    Node& n = nodes_[id];
    if (!n.has_adjoint) {
        n.adjoint = Tensor(n.value.shape());
        n.has_adjoint = true;
    }
    return n.adjoint;
}

void Tape::accumulate(int id, const Tensor& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (!n.has_adjoint) {
        n.adjoint = g;
        n.has_adjoint = true;
        return;
    }
    add_into(n.adjoint, g);
}

void Tape::backward(const Var& root) {
    if (root.tape != this) throw std::logic_error("autodiff: backward on foreign tape");
    if (nodes_[root.id].value.size() != 1)
        throw std::logic_error("contract error: backward requires a scalar root");
    adj(root.id)[0] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.needs_grad && n.has_adjoint && n.back) n.back(*this, i);
    }
}

const Tensor& Tape::grad(const Var& v) const {
    const Node& n = nodes_[v.id];
    if (!n.has_adjoint)
        throw std::logic_error("autodiff: gradient not available (run backward first)");
    return n.adjoint;
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(Var a, Fwd fwd, Bwd bwd) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, bwd](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& x = tp.node_val(pa);
        const Tensor& y = tp.node_val(self);
        Tensor gx(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = bwd(x[i], y[i]) * g[i];
        tp.accumulate(pa, gx);
    });
}

}  // namespace

Var add(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& xa = t.val(a);
    const Tensor& xb = t.val(b);
    check_same_shape(xa, xb, "add");
    Tensor y(xa.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] + xb[i];
    int pa = a.id, pb = b.id;
    return t.make(std::move(y), {pa, pb}, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        tp.accumulate(pa, g);
        tp.accumulate(pb, g);
    });
}

Var sub(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& xa = t.val(a);
    const Tensor& xb = t.val(b);
    check_same_shape(xa, xb, "sub");
    Tensor y(xa.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] - xb[i];
    int pa = a.id, pb = b.id;
    return t.make(std::move(y), {pa, pb}, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        tp.accumulate(pa, g);
        Tensor gb(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
        tp.accumulate(pb, gb);
    });
}

Var mul(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& xa = t.val(a);
    const Tensor& xb = t.val(b);
    check_same_shape(xa, xb, "mul");
    Tensor y(xa.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xa[i] * xb[i];
    int pa = a.id, pb = b.id;
    return t.make(std::move(y), {pa, pb}, [pa, pb](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& va = tp.node_val(pa);
        const Tensor& vb = tp.node_val(pb);
        Tensor ga(va.shape()), gb(vb.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] = g[i] * vb[i];
            gb[i] = g[i] * va[i];
        }
        tp.accumulate(pa, ga);
        tp.accumulate(pb, gb);
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
    return unary_op(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_const(Var a, double c) {
    return unary_op(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
    return unary_op(a, [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
    return unary_op(a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
    return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                    [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
    return unary_op(a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Var log(Var a) {
    return unary_op(a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Var sqrt(Var a) {
    return unary_op(a, [](double x) { return std::sqrt(x); },
                    [](double, double y) { return 0.5 / y; });
}

Var square(Var a) {
    return unary_op(a, [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

Var scale_by(Var a, Var s) {
    check_same_tape(a, s);
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    double sv = t.val(s).item();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * sv;
    int pa = a.id, ps = s.id;
    return t.make(std::move(y), {pa, ps}, [pa, ps](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& x = tp.node_val(pa);
        double sv = tp.node_val(ps).item();
        Tensor ga(x.shape());
        double gs = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] = g[i] * sv;
            gs += g[i] * x[i];
        }
        tp.accumulate(pa, ga);
        tp.accumulate(ps, Tensor::scalar(gs));
    });
}

Var div_by(Var a, Var s) {
    check_same_tape(a, s);
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    double sv = t.val(s).item();
    Tensor y(x.shape());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] / sv;
    int pa = a.id, ps = s.id;
    return t.make(std::move(y), {pa, ps}, [pa, ps](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& x = tp.node_val(pa);
        double sv = tp.node_val(ps).item();
        Tensor ga(x.shape());
        double gs = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] = g[i] / sv;
            gs -= g[i] * x[i] / (sv * sv);
        }
        tp.accumulate(pa, ga);
        tp.accumulate(ps, Tensor::scalar(gs));
    });
}

// ---------------------------------------------------------------------------
// reductions

Var sum(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i];
    int pa = a.id;
    return t.make(Tensor::scalar(s), {pa}, [pa](Tape& tp, int self) {
        double g = tp.adj(self)[0];
        const Tensor& x = tp.node_val(pa);
        tp.accumulate(pa, Tensor::full(x.shape(), g));
    });
}

Var mean(Var a) {
    const Tensor& x = a.tape->val(a);
    return scale(sum(a), 1.0 / static_cast<double>(x.size()));
}

Var mean_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    Tensor y({1, n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) y[c] += x.at(r, c);
    for (std::size_t c = 0; c < n; ++c) y[c] /= static_cast<double>(m);
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        double inv = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gx.at(r, c) = g[c] * inv;
        tp.accumulate(pa, gx);
    });
}

// ---------------------------------------------------------------------------
// linear algebra

namespace {

// C[m x n] += A[m x k] * B[k x n]
void matmul_acc(const double* A, const double* B, double* C, std::size_t m,
                std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            const double* b = B + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C[m x n] += A[m x k] * B^T where Bt is [n x k]
void matmul_bt_acc(const double* A, const double* Bt, double* C, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b = Bt + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[p] * b[p];
            c[j] += s;
        }
    }
}

// C[k x n] += A^T * B where A is [m x k], B is [m x n]
void matmul_at_acc(const double* A, const double* B, double* C, std::size_t m,
                   std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        const double* b = B + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            double av = a[p];
            if (av == 0.0) continue;
            double* c = C + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace

Var matmul(Var a, Var b) {
    check_same_tape(a, b);
    Tape& t = *a.tape;
    const Tensor& xa = t.val(a);
    const Tensor& xb = t.val(b);
    if (xa.rank() != 2 || xb.rank() != 2 || xa.cols() != xb.rows())
        throw std::invalid_argument("dimension error: matmul " + xa.shape_str() + " x " +
                                    xb.shape_str());
    std::size_t m = xa.rows(), k = xa.cols(), n = xb.cols();
    Tensor y({m, n});
    matmul_acc(xa.data(), xb.data(), y.data(), m, k, n);
    int pa = a.id, pb = b.id;
    return t.make(std::move(y), {pa, pb}, [pa, pb, m, k, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& va = tp.node_val(pa);
        const Tensor& vb = tp.node_val(pb);
        if (tp.needs_grad(pa)) {
            Tensor ga({m, k});
            matmul_bt_acc(g.data(), vb.data(), ga.data(), m, n, k);
            tp.accumulate(pa, ga);
        }
        if (tp.needs_grad(pb)) {
            Tensor gb({k, n});
            matmul_at_acc(va.data(), g.data(), gb.data(), m, k, n);
            tp.accumulate(pb, gb);
        }
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    Tensor y({n, m});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) y.at(c, r) = x.at(r, c);
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gx.at(r, c) = g.at(c, r);
        tp.accumulate(pa, gx);
    });
}

Var add_row_broadcast(Var x, Var b) {
    check_same_tape(x, b);
    Tape& t = *x.tape;
    const Tensor& vx = t.val(x);
    const Tensor& vb = t.val(b);
    if (vb.rows() != 1 || vb.cols() != vx.cols())
        throw std::invalid_argument("dimension error: row broadcast " + vx.shape_str() +
                                    " + " + vb.shape_str());
    std::size_t m = vx.rows(), n = vx.cols();
    Tensor y({m, n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) = vx.at(r, c) + vb[c];
    int px = x.id, pb = b.id;
    return t.make(std::move(y), {px, pb}, [px, pb, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        tp.accumulate(px, g);
        if (tp.needs_grad(pb)) {
            Tensor gb({1, n});
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gb[c] += g.at(r, c);
            tp.accumulate(pb, gb);
        }
    });
}

Var mul_row_broadcast(Var x, Var s) {
    check_same_tape(x, s);
    Tape& t = *x.tape;
    const Tensor& vx = t.val(x);
    const Tensor& vs = t.val(s);
    if (vs.rows() != 1 || vs.cols() != vx.cols())
        throw std::invalid_argument("dimension error: row broadcast " + vx.shape_str() +
                                    " * " + vs.shape_str());
    std::size_t m = vx.rows(), n = vx.cols();
    Tensor y({m, n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) = vx.at(r, c) * vs[c];
    int px = x.id, ps = s.id;
    return t.make(std::move(y), {px, ps}, [px, ps, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& vx = tp.node_val(px);
        const Tensor& vs = tp.node_val(ps);
        if (tp.needs_grad(px)) {
            Tensor gx({m, n});
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gx.at(r, c) = g.at(r, c) * vs[c];
            tp.accumulate(px, gx);
        }
        if (tp.needs_grad(ps)) {
            Tensor gs({1, n});
            for (std::size_t r = 0; r < m; ++r)
                for (std::size_t c = 0; c < n; ++c) gs[c] += g.at(r, c) * vx.at(r, c);
            tp.accumulate(ps, gs);
        }
    });
}

// ---------------------------------------------------------------------------
// shaping

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("contract error: concat_cols of nothing");
    Tape& t = *parts[0].tape;
    std::size_t m = t.val(parts[0]).rows();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (t.val(p).rows() != m)
            throw std::invalid_argument("dimension error: concat_cols row mismatch");
        total += t.val(p).cols();
    }
    Tensor y({m, total});
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = t.val(p);
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) y.at(r, off + c) = v.at(r, c);
        ids.push_back(p.id);
        widths.push_back(v.cols());
        off += v.cols();
    }
    return t.make(std::move(y), ids, [ids, widths, m](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        std::size_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (tp.needs_grad(ids[i])) {
                Tensor gp({m, widths[i]});
                for (std::size_t r = 0; r < m; ++r)
                    for (std::size_t c = 0; c < widths[i]; ++c) gp.at(r, c) = g.at(r, off + c);
                tp.accumulate(ids[i], gp);
            }
            off += widths[i];
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("contract error: concat_rows of nothing");
    Tape& t = *parts[0].tape;
    std::size_t n = t.val(parts[0]).cols();
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (t.val(p).cols() != n)
            throw std::invalid_argument("dimension error: concat_rows column mismatch");
        total += t.val(p).rows();
    }
    Tensor y({total, n});
    std::vector<int> ids;
    std::vector<std::size_t> heights;
    std::size_t off = 0;
    for (const Var& p : parts) {
        const Tensor& v = t.val(p);
        for (std::size_t r = 0; r < v.rows(); ++r)
            for (std::size_t c = 0; c < n; ++c) y.at(off + r, c) = v.at(r, c);
        ids.push_back(p.id);
        heights.push_back(v.rows());
        off += v.rows();
    }
    return t.make(std::move(y), ids, [ids, heights, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        std::size_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (tp.needs_grad(ids[i])) {
                Tensor gp({heights[i], n});
                for (std::size_t r = 0; r < heights[i]; ++r)
                    for (std::size_t c = 0; c < n; ++c) gp.at(r, c) = g.at(off + r, c);
                tp.accumulate(ids[i], gp);
            }
            off += heights[i];
        }
    });
}

Var slice_rows(Var a, std::size_t r0, std::size_t r1) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    if (r1 > x.rows() || r0 >= r1)
        throw std::invalid_argument("dimension error: slice_rows out of range");
    std::size_t n = x.cols();
    Tensor y({r1 - r0, n});
    for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = 0; c < n; ++c) y.at(r - r0, c) = x.at(r, c);
    int pa = a.id;
    std::size_t m = x.rows();
    return t.make(std::move(y), {pa}, [pa, r0, r1, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = 0; c < n; ++c) gx.at(r, c) = g.at(r - r0, c);
        tp.accumulate(pa, gx);
    });
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    if (c1 > x.cols() || c0 >= c1)
        throw std::invalid_argument("dimension error: slice_cols out of range");
    std::size_t m = x.rows();
    Tensor y({m, c1 - c0});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = c0; c < c1; ++c) y.at(r, c - c0) = x.at(r, c);
    int pa = a.id;
    std::size_t n = x.cols();
    return t.make(std::move(y), {pa}, [pa, c0, c1, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = c0; c < c1; ++c) gx.at(r, c) = g.at(r, c - c0);
        tp.accumulate(pa, gx);
    });
}

Var pad_cols(Var a, std::size_t new_cols) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    if (new_cols < x.cols())
        throw std::invalid_argument("contract error: pad_cols target narrower than input");
    std::size_t m = x.rows(), n = x.cols();
    Tensor y({m, new_cols});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) = x.at(r, c);
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c) gx.at(r, c) = g.at(r, c);
        tp.accumulate(pa, gx);
    });
}

Var gather_rows(Var table, const std::vector<int>& idx) {
    Tape& t = *table.tape;
    const Tensor& x = t.val(table);
    std::size_t n = x.cols(), m = x.rows();
    Tensor y({idx.size(), n});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= m)
            throw std::out_of_range("codebook error: row index out of range");
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) = x.at(idx[r], c);
    }
    int pa = table.id;
    return t.make(std::move(y), {pa}, [pa, idx, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t c = 0; c < n; ++c) gx.at(idx[r], c) += g.at(r, c);
        tp.accumulate(pa, gx);
    });
}

Var stopgrad(Var a) { return a.tape->constant(a.tape->val(a)); }

// ---------------------------------------------------------------------------
// normalization

Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    Tensor y({m, n});
    for (std::size_t r = 0; r < m; ++r) {
        double mx = x.at(r, 0);
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double e = std::exp(x.at(r, c) - mx);
            y.at(r, c) = e;
            z += e;
        }
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) /= z;
    }
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& y = tp.node_val(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r) {
            double dotgy = 0.0;
            for (std::size_t c = 0; c < n; ++c) dotgy += g.at(r, c) * y.at(r, c);
            for (std::size_t c = 0; c < n; ++c)
                gx.at(r, c) = y.at(r, c) * (g.at(r, c) - dotgy);
        }
        tp.accumulate(pa, gx);
    });
}

Var log_softmax_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    Tensor y({m, n});
    for (std::size_t r = 0; r < m; ++r) {
        double mx = x.at(r, 0);
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x.at(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) z += std::exp(x.at(r, c) - mx);
        double lz = mx + std::log(z);
        for (std::size_t c = 0; c < n; ++c) y.at(r, c) = x.at(r, c) - lz;
    }
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& y = tp.node_val(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < n; ++c) gsum += g.at(r, c);
            for (std::size_t c = 0; c < n; ++c)
                gx.at(r, c) = g.at(r, c) - std::exp(y.at(r, c)) * gsum;
        }
        tp.accumulate(pa, gx);
    });
}

Var layer_norm_rows(Var x, Var gain, Var bias, double eps) {
    check_same_tape(x, gain);
    check_same_tape(x, bias);
    if (eps <= 0) throw std::invalid_argument("parameter error: layer_norm eps must be > 0");
    Tape& t = *x.tape;
    const Tensor& vx = t.val(x);
    const Tensor& vg = t.val(gain);
    const Tensor& vb = t.val(bias);
    std::size_t m = vx.rows(), n = vx.cols();
    if (n == 0 || vx.size() == 0) throw std::invalid_argument("empty-input error: layer_norm");
    if (vg.cols() != n || vb.cols() != n)
        throw std::invalid_argument("dimension error: layer_norm affine width");
    Tensor y({m, n});
    // Normalized values are recomputed in backward from the cached inputs.
    for (std::size_t r = 0; r < m; ++r) {
        double mu = 0.0;
        for (std::size_t c = 0; c < n; ++c) mu += vx.at(r, c);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            double d = vx.at(r, c) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < n; ++c)
            y.at(r, c) = (vx.at(r, c) - mu) * inv * vg[c] + vb[c];
    }
    int px = x.id, pg = gain.id, pb = bias.id;
    return t.make(std::move(y), {px, pg, pb}, [px, pg, pb, eps, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& vx = tp.node_val(px);
        const Tensor& vg = tp.node_val(pg);
        Tensor gx({m, n}), gg({1, n}), gb({1, n});
        for (std::size_t r = 0; r < m; ++r) {
            double mu = 0.0;
            for (std::size_t c = 0; c < n; ++c) mu += vx.at(r, c);
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                double d = vx.at(r, c) - mu;
                var += d * d;
            }
            var /= static_cast<double>(n);
            double inv = 1.0 / std::sqrt(var + eps);
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                double xhat = (vx.at(r, c) - mu) * inv;
                double gy = g.at(r, c) * vg[c];
                mean_gy += gy;
                mean_gyx += gy * xhat;
                gg[c] += g.at(r, c) * xhat;
                gb[c] += g.at(r, c);
            }
            mean_gy /= static_cast<double>(n);
            mean_gyx /= static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c) {
                double xhat = (vx.at(r, c) - mu) * inv;
                double gy = g.at(r, c) * vg[c];
                gx.at(r, c) = (gy - mean_gy - xhat * mean_gyx) * inv;
            }
        }
        tp.accumulate(px, gx);
        tp.accumulate(pg, gg);
        tp.accumulate(pb, gb);
    });
}

void batch_column_stats(const Tensor& x, std::vector<double>& mean, std::vector<double>& var) {
    std::size_t m = x.rows(), n = x.cols();
    mean.assign(n, 0.0);
    var.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) mean[c] += x.at(r, c);
    for (std::size_t c = 0; c < n; ++c) mean[c] /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            double d = x.at(r, c) - mean[c];
            var[c] += d * d;
        }
    for (std::size_t c = 0; c < n; ++c) var[c] /= static_cast<double>(m);
}

Var batch_norm_rows(Var x, Var gain, Var bias, double eps) {
    check_same_tape(x, gain);
    check_same_tape(x, bias);
    Tape& t = *x.tape;
    const Tensor& vx = t.val(x);
    const Tensor& vg = t.val(gain);
    std::size_t m = vx.rows(), n = vx.cols();
    if (vg.cols() != n || t.val(bias).cols() != n)
        throw std::invalid_argument("dimension error: batch_norm affine width");
    std::vector<double> mu, var;
    batch_column_stats(vx, mu, var);
    Tensor y({m, n});
    const Tensor& vb = t.val(bias);
    for (std::size_t c = 0; c < n; ++c) {
        double inv = 1.0 / std::sqrt(var[c] + eps);
        for (std::size_t r = 0; r < m; ++r)
            y.at(r, c) = (vx.at(r, c) - mu[c]) * inv * vg[c] + vb[c];
    }
    int px = x.id, pg = gain.id, pb = bias.id;
    return t.make(std::move(y), {px, pg, pb}, [px, pg, pb, eps, m, n](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        const Tensor& vx = tp.node_val(px);
        const Tensor& vg = tp.node_val(pg);
        std::vector<double> mu, var;
        batch_column_stats(vx, mu, var);
        Tensor gx({m, n}), gg({1, n}), gb({1, n});
        for (std::size_t c = 0; c < n; ++c) {
            double inv = 1.0 / std::sqrt(var[c] + eps);
            double mean_gy = 0.0, mean_gyx = 0.0;
            for (std::size_t r = 0; r < m; ++r) {
                double xhat = (vx.at(r, c) - mu[c]) * inv;
                double gy = g.at(r, c) * vg[c];
                mean_gy += gy;
                mean_gyx += gy * xhat;
                gg[c] += g.at(r, c) * xhat;
                gb[c] += g.at(r, c);
            }
            mean_gy /= static_cast<double>(m);
            mean_gyx /= static_cast<double>(m);
            for (std::size_t r = 0; r < m; ++r) {
                double xhat = (vx.at(r, c) - mu[c]) * inv;
                double gy = g.at(r, c) * vg[c];
                gx.at(r, c) = (gy - mean_gy - xhat * mean_gyx) * inv;
            }
        }
        tp.accumulate(px, gx);
        tp.accumulate(pg, gg);
        tp.accumulate(pb, gb);
    });
}

// ---------------------------------------------------------------------------
// sequence ops

Var max_pool2_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    std::size_t mo = (m + 1) / 2;
    Tensor y({mo, n});
    std::vector<std::size_t> argmax(mo * n);
    for (std::size_t r = 0; r < mo; ++r) {
        std::size_t r0 = 2 * r, r1 = std::min(2 * r + 1, m - 1);
        for (std::size_t c = 0; c < n; ++c) {
            // first-max tie rule keeps pooling deterministic
            if (x.at(r0, c) >= x.at(r1, c)) {
                y.at(r, c) = x.at(r0, c);
                argmax[r * n + c] = r0;
            } else {
                y.at(r, c) = x.at(r1, c);
                argmax[r * n + c] = r1;
            }
        }
    }
    int pa = a.id;
    return t.make(std::move(y), {pa},
                  [pa, m, n, mo, argmax = std::move(argmax)](Tape& tp, int self) {
                      const Tensor& g = tp.adj(self);
                      Tensor gx({m, n});
                      for (std::size_t r = 0; r < mo; ++r)
                          for (std::size_t c = 0; c < n; ++c)
                              gx.at(argmax[r * n + c], c) += g.at(r, c);
                      tp.accumulate(pa, gx);
                  });
}

Var unfold_rows_replicate(Var a, std::size_t k) {
    Tape& t = *a.tape;
    const Tensor& x = t.val(a);
    std::size_t m = x.rows(), n = x.cols();
    std::size_t half = k / 2;
    Tensor y({m, k * n});
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t o = 0; o < k; ++o) {
            long src = static_cast<long>(r) + static_cast<long>(o) - static_cast<long>(half);
            std::size_t rs = static_cast<std::size_t>(std::clamp<long>(src, 0, static_cast<long>(m) - 1));
            for (std::size_t c = 0; c < n; ++c) y.at(r, o * n + c) = x.at(rs, c);
        }
    int pa = a.id;
    return t.make(std::move(y), {pa}, [pa, m, n, k, half](Tape& tp, int self) {
        const Tensor& g = tp.adj(self);
        Tensor gx({m, n});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t o = 0; o < k; ++o) {
                long src = static_cast<long>(r) + static_cast<long>(o) - static_cast<long>(half);
                std::size_t rs =
                    static_cast<std::size_t>(std::clamp<long>(src, 0, static_cast<long>(m) - 1));
                for (std::size_t c = 0; c < n; ++c) gx.at(rs, c) += g.at(r, o * n + c);
            }
        tp.accumulate(pa, gx);
    });
}

}  // namespace signx
