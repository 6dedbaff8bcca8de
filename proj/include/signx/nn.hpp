// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "signx/autodiff.hpp"
#include "signx/rng.hpp"
#include "signx/tensor.hpp"

namespace signx {

// Named parameter registry. Names sort lexicographically, which fixes the
// iteration order for the optimizer, checkpoints and the global-norm clip.
class ParamStore {
public:
    // Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from a stream
    // keyed by (seed, name), so creation order does not matter.
    Tensor& def_linear(const std::string& name, std::vector<std::size_t> shape,
                       std::uint64_t seed);
    Tensor& def_const(const std::string& name, std::vector<std::size_t> shape, double fill);

    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    void set(const std::string& name, Tensor value);

    std::vector<std::string> names() const;
    std::size_t count() const { return params_.size(); }
    const std::map<std::string, Tensor>& all() const { return params_; }
    std::map<std::string, Tensor>& all() { return params_; }

private:
    std::map<std::string, Tensor> params_;
};

// Per-step view of a ParamStore on a tape. Forward code looks parameters up
// by name; after backward the gradients are read back through the same vars.
class Binding {
public:
    Binding(Tape& tape, ParamStore& store, bool trainable);
    Var operator[](const std::string& name) const;
    Tape& tape() const { return *tape_; }
    // Gradients for every bound parameter that received one.
    std::map<std::string, Tensor> grads() const;

private:
    Tape* tape_;
    std::map<std::string, Var> vars_;
};

// Train-time stochastic state: inverted dropout driven by a named stream.
struct DropoutCtx {
    bool train = false;
    Rng* rng = nullptr;
    Var apply(Var x, double p) const;
};

struct Linear {
    std::string w, b;
    bool has_bias = true;
    static Linear make(ParamStore& ps, const std::string& prefix, std::size_t in,
                       std::size_t out, std::uint64_t seed, bool bias = true);
    Var operator()(const Binding& bp, Var x) const;
};

struct LayerNorm {
    std::string gain, bias;
    double eps = 1e-5;
    static LayerNorm make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                          double eps = 1e-5);
    Var operator()(const Binding& bp, Var x) const;
};

struct AttnResult {
    Var out;
    // softmax weights per head, rows = query positions, cols = key positions
    std::vector<Tensor> head_weights;
};

struct MultiHeadAttention {
    Linear wq, wk, wv, wo;
    std::size_t heads = 1;
    std::size_t dim = 0;
    static MultiHeadAttention make(ParamStore& ps, const std::string& prefix,
                                   std::size_t dim, std::size_t heads, std::uint64_t seed);
    AttnResult operator()(const Binding& bp, Var query, Var keyval, bool causal,
                          const DropoutCtx& drop, double p_attn) const;
};

struct FeedForward {
    Linear in, out;
    static FeedForward make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                            std::size_t hidden, std::uint64_t seed);
    Var operator()(const Binding& bp, Var x, const DropoutCtx& drop, double p_relu) const;
};

// Pre-norm transformer block: x + Drop(Attn(LN(x))), then x + Drop(FFN(LN(x))).
struct EncoderBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;
    static EncoderBlock make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                             std::size_t heads, std::size_t ffn_hidden, std::uint64_t seed);
    Var operator()(const Binding& bp, Var x, const DropoutCtx& drop, double p_attn,
                   double p_relu, double p_res, AttnResult* attn_out = nullptr) const;
};

struct DecoderBlock {
    LayerNorm ln1, ln2, ln3;
    MultiHeadAttention self_attn, cross_attn;
    FeedForward ffn;
    static DecoderBlock make(ParamStore& ps, const std::string& prefix, std::size_t dim,
                             std::size_t heads, std::size_t ffn_hidden, std::uint64_t seed);
    Var operator()(const Binding& bp, Var x, Var memory, const DropoutCtx& drop,
                   double p_attn, double p_relu, double p_res,
                   AttnResult* cross_out = nullptr) const;
};

// Single gated recurrent cell (GRU equations); the bidirectional stack lives
// in the recognizer.
struct GruCell {
    Linear xz, xr, xn;  // input projections
    Linear hz, hr, hn;  // hidden projections (no bias)
    std::size_t hidden = 0;
    static GruCell make(ParamStore& ps, const std::string& prefix, std::size_t in,
                        std::size_t hidden, std::uint64_t seed);
    Var step(const Binding& bp, Var x_t, Var h_prev) const;
};

struct Conv1dBranch {
    Linear proj;  // applied to the unfolded input
    std::size_t kernel = 0;
    static Conv1dBranch make(ParamStore& ps, const std::string& prefix, std::size_t in,
                             std::size_t out, std::size_t kernel, std::uint64_t seed);
    Var operator()(const Binding& bp, Var x) const;
};

// BatchNorm over the time axis of one sequence; running stats are plain
// state on the struct, updated only in train mode.
struct BatchNorm {
    std::string gain, bias;
    std::vector<double> running_mean, running_var;
    double momentum = 0.9;
    double eps = 1e-5;
    static BatchNorm make(ParamStore& ps, const std::string& prefix, std::size_t channels,
                          double momentum = 0.9);
    Var operator()(const Binding& bp, Var x, bool train);
};

}  // namespace signx
