// SPDX-License-Identifier: Apache-2.0
#include "signx/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace signx {

Tensor& ParamStore::def_linear(const std::string& name, std::vector<std::size_t> shape,
                               std::uint64_t seed) {
    if (params_.count(name)) return params_[name];
    Tensor t(shape);
    std::size_t fan_in = shape.size() >= 2 ? shape[0] : shape.back();
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Rng rng = Rng::child(seed, "init/" + name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    params_[name] = std::move(t);
    return params_[name];
}

Tensor& ParamStore::def_const(const std::string& name, std::vector<std::size_t> shape,
                              double fill) {
    if (params_.count(name)) return params_[name];
    params_[name] = Tensor::full(std::move(shape), fill);
    return params_[name];
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("parameter not found: " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("parameter not found: " + name);
    return it->second;
}

void ParamStore::set(const std::string& name, Tensor value) { params_[name] = std::move(value); }

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [k, _] : params_) out.push_back(k);
    return out;
}

Binding::Binding(Tape& tape, ParamStore& store, bool trainable) : tape_(&tape) {
    for (auto& [name, value] : store.all()) vars_.emplace(name, tape.leaf(value, trainable));
}

Var Binding::operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw std::out_of_range("parameter not bound: " + name);
    return it->second;
}

std::map<std::string, Tensor> Binding::grads() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, var] : vars_) {
        try {
            out.emplace(name, tape_->grad(var));
        } catch (const std::logic_error&) {
            // parameter unused this step; contributes a zero gradient
            out.emplace(name, Tensor::zeros_like(tape_->val(var)));
        }
    }
    return out;
}

Var DropoutCtx::apply(Var x, double p) const {
    if (!train || p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("parameter error: dropout rate must be < 1");
    const Tensor& v = x.tape->val(x);
    Tensor mask(v.shape());
    double keep = 1.0 - p;
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = rng->bernoulli(p) ? 0.0 : 1.0 / keep;
    return mul(x, x.tape->constant(std::move(mask)));
}

Linear Linear::make(ParamStore& ps, const std::string& prefix, std::size_t in, std::size_t out,
                    std::uint64_t seed, bool bias) {
    Linear l;
    l.w = prefix + "/w";
    l.b = prefix + "/b";
    l.has_bias = bias;
    ps.def_linear(l.w, {in, out}, seed);
    if (bias) ps.def_const(l.b, {1, out}, 0.0);
    return l;
}

Var Linear::operator()(const Binding& bp, Var x) const {
    Var y = matmul(x, bp[w]);
    if (has_bias) y = add_row_broadcast(y, bp[b]);
    return y;
}

LayerNorm LayerNorm::make(ParamStore& ps, const std::string& prefix, std::size_t dim, double eps) {
    LayerNorm ln;
    ln.gain = prefix + "/gain";
    ln.bias = prefix + "/bias";
    ln.eps = eps;
    ps.def_const(ln.gain, {1, dim}, 1.0);
    ps.def_const(ln.bias, {1, dim}, 0.0);
    return ln;
}

Var LayerNorm::operator()(const Binding& bp, Var x) const {
    return layer_norm_rows(x, bp[gain], bp[bias], eps);
}

MultiHeadAttention MultiHeadAttention::make(ParamStore& ps, const std::string& prefix,
                                            std::size_t dim, std::size_t heads,
                                            std::uint64_t seed) {
    if (dim % heads != 0)
        throw std::invalid_argument("dimension error: attention width not divisible by heads");
    MultiHeadAttention a;
    a.wq = Linear::make(ps, prefix + "/q", dim, dim, seed);
    a.wk = Linear::make(ps, prefix + "/k", dim, dim, seed);
    a.wv = Linear::make(ps, prefix + "/v", dim, dim, seed);
    a.wo = Linear::make(ps, prefix + "/o", dim, dim, seed);
    a.heads = heads;
    a.dim = dim;
    return a;
}

AttnResult MultiHeadAttention::operator()(const Binding& bp, Var query, Var keyval, bool causal,
                                          const DropoutCtx& drop, double p_attn) const {
    Tape& t = *query.tape;
    std::size_t dk = dim / heads;
    Var q = wq(bp, query);
    Var k = wk(bp, keyval);
    Var v = wv(bp, keyval);
    std::size_t m = t.val(q).rows();
    std::size_t n = t.val(k).rows();

    Tensor mask_t;
    if (causal) {
        mask_t = Tensor({m, n});
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < n; ++c)
                if (c > r) mask_t.at(r, c) = -1e30;
    }

    AttnResult res;
    std::vector<Var> ctxs;
    for (std::size_t h = 0; h < heads; ++h) {
        Var qh = slice_cols(q, h * dk, (h + 1) * dk);
        Var kh = slice_cols(k, h * dk, (h + 1) * dk);
        Var vh = slice_cols(v, h * dk, (h + 1) * dk);
        Var scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dk)));
        if (causal) scores = add(scores, t.constant(mask_t));
        Var weights = softmax_rows(scores);
        res.head_weights.push_back(t.val(weights));
        weights = drop.apply(weights, p_attn);
        ctxs.push_back(matmul(weights, vh));
    }
    Var ctx = heads == 1 ? ctxs[0] : concat_cols(ctxs);
    res.out = wo(bp, ctx);
    return res;
}

FeedForward FeedForward::make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                              std::size_t hidden, std::uint64_t seed) {
    FeedForward f;
    f.in = Linear::make(ps, prefix + "/in", dim, hidden, seed);
    f.out = Linear::make(ps, prefix + "/out", hidden, dim, seed);
    return f;
}

Var FeedForward::operator()(const Binding& bp, Var x, const DropoutCtx& drop,
                            double p_relu) const {
    return out(bp, drop.apply(relu(in(bp, x)), p_relu));
}

EncoderBlock EncoderBlock::make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                                std::size_t heads, std::size_t ffn_hidden, std::uint64_t seed) {
    EncoderBlock b;
    b.ln1 = LayerNorm::make(ps, prefix + "/ln1", dim);
    b.ln2 = LayerNorm::make(ps, prefix + "/ln2", dim);
    b.attn = MultiHeadAttention::make(ps, prefix + "/attn", dim, heads, seed);
    b.ffn = FeedForward::make(ps, prefix + "/ffn", dim, ffn_hidden, seed);
    return b;
}

Var EncoderBlock::operator()(const Binding& bp, Var x, const DropoutCtx& drop, double p_attn,
                             double p_relu, double p_res, AttnResult* attn_out) const {
    Var nx = ln1(bp, x);
    AttnResult ar = attn(bp, nx, nx, false, drop, p_attn);
    if (attn_out) *attn_out = ar;
    x = add(x, drop.apply(ar.out, p_res));
    x = add(x, drop.apply(ffn(bp, ln2(bp, x), drop, p_relu), p_res));
    return x;
}

DecoderBlock DecoderBlock::make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                                std::size_t heads, std::size_t ffn_hidden, std::uint64_t seed) {
    DecoderBlock b;
    b.ln1 = LayerNorm::make(ps, prefix + "/ln1", dim);
    b.ln2 = LayerNorm::make(ps, prefix + "/ln2", dim);
    b.ln3 = LayerNorm::make(ps, prefix + "/ln3", dim);
    b.self_attn = MultiHeadAttention::make(ps, prefix + "/self", dim, heads, seed);
    b.cross_attn = MultiHeadAttention::make(ps, prefix + "/cross", dim, heads, seed);
    b.ffn = FeedForward::make(ps, prefix + "/ffn", dim, ffn_hidden, seed);
    return b;
}

Var DecoderBlock::operator()(const Binding& bp, Var x, Var memory, const DropoutCtx& drop,
                             double p_attn, double p_relu, double p_res,
                             AttnResult* cross_out) const {
    AttnResult sa = self_attn(bp, ln1(bp, x), ln1(bp, x), true, drop, p_attn);
    x = add(x, drop.apply(sa.out, p_res));
    AttnResult ca = cross_attn(bp, ln2(bp, x), memory, false, drop, p_attn);
    if (cross_out) *cross_out = ca;
    x = add(x, drop.apply(ca.out, p_res));
    x = add(x, drop.apply(ffn(bp, ln3(bp, x), drop, p_relu), p_res));
    return x;
}

GruCell GruCell::make(ParamStore& ps, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::uint64_t seed) {
    GruCell c;
    c.xz = Linear::make(ps, prefix + "/xz", in, hidden, seed);
    c.xr = Linear::make(ps, prefix + "/xr", in, hidden, seed);
    c.xn = Linear::make(ps, prefix + "/xn", in, hidden, seed);
    c.hz = Linear::make(ps, prefix + "/hz", hidden, hidden, seed, false);
    c.hr = Linear::make(ps, prefix + "/hr", hidden, hidden, seed, false);
    c.hn = Linear::make(ps, prefix + "/hn", hidden, hidden, seed, false);
    c.hidden = hidden;
    return c;
}

Var GruCell::step(const Binding& bp, Var x_t, Var h_prev) const {
    Var z = sigmoid(add(xz(bp, x_t), hz(bp, h_prev)));
    Var r = sigmoid(add(xr(bp, x_t), hr(bp, h_prev)));
    Var n = tanh(add(xn(bp, x_t), mul(r, hn(bp, h_prev))));
    Tape& t = *x_t.tape;
    Var one = t.constant(Tensor::full(t.val(z).shape(), 1.0));
    return add(mul(sub(one, z), n), mul(z, h_prev));
}

Conv1dBranch Conv1dBranch::make(ParamStore& ps, const std::string& prefix, std::size_t in,
                                std::size_t out, std::size_t kernel, std::uint64_t seed) {
    Conv1dBranch c;
    c.proj = Linear::make(ps, prefix + "/w", kernel * in, out, seed);
    c.kernel = kernel;
    return c;
}

Var Conv1dBranch::operator()(const Binding& bp, Var x) const {
    return proj(bp, unfold_rows_replicate(x, kernel));
}

BatchNorm BatchNorm::make(ParamStore& ps, const std::string& prefix, std::size_t channels,
                          double momentum) {
    BatchNorm bn;
    bn.gain = prefix + "/gain";
    bn.bias = prefix + "/bias";
    bn.momentum = momentum;
    bn.running_mean.assign(channels, 0.0);
    bn.running_var.assign(channels, 1.0);
    ps.def_const(bn.gain, {1, channels}, 1.0);
    ps.def_const(bn.bias, {1, channels}, 0.0);
    return bn;
}

Var BatchNorm::operator()(const Binding& bp, Var x, bool train) {
    Tape& t = *x.tape;
    std::size_t n = t.val(x).cols();
    if (n != running_mean.size())
        throw std::invalid_argument("dimension error: batch_norm channel count");
    if (train) {
        std::vector<double> mu, var;
        batch_column_stats(t.val(x), mu, var);
        for (std::size_t c = 0; c < n; ++c) {
            running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mu[c];
            running_var[c] = momentum * running_var[c] + (1.0 - momentum) * var[c];
        }
        return batch_norm_rows(x, bp[gain], bp[bias], eps);
    }
    Tensor shift({1, n}), inv({1, n});
    for (std::size_t c = 0; c < n; ++c) {
        shift[c] = -running_mean[c];
        inv[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
    Var y = add_row_broadcast(x, t.constant(shift));
    y = mul_row_broadcast(y, t.constant(inv));
    y = mul_row_broadcast(y, bp[gain]);
    return add_row_broadcast(y, bp[bias]);
}

}  // namespace signx
