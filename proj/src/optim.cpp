// SPDX-License-Identifier: Apache-2.0
#include "signx/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace signx {

double clip_global_norm(GradMap& grads, double clip) {
    double sq = 0.0;
    for (const auto& [_, g] : grads)
        for (std::size_t i = 0; i < g.size(); ++i) sq += g[i] * g[i];
    double norm = std::sqrt(sq);
    if (clip > 0.0 && norm > clip) {
        double s = clip / norm;
        for (auto& [_, g] : grads)
            for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
    }
    return norm;
}

void adam_step(ParamStore& params, GradMap grads, OptimizerState& state) {
    for (const auto& [name, g] : grads)
        if (!g.all_finite())
            throw std::runtime_error("training-divergence error: non-finite gradient in " + name);

    clip_global_norm(grads, state.clip_norm);
    state.t += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (auto& [name, g] : grads) {
        Tensor& p = params.get(name);
        if (!p.same_shape(g))
            throw std::invalid_argument("dimension error: gradient shape for " + name);
        auto mit = state.m.find(name);
        if (mit == state.m.end()) {
            state.m.emplace(name, Tensor::zeros_like(p));
            state.v.emplace(name, Tensor::zeros_like(p));
        }
        Tensor& m = state.m[name];
        Tensor& v = state.v[name];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= state.lr * (mhat / (std::sqrt(vhat) + state.eps_adam) +
                                state.weight_decay * p[i]);
        }
    }
}

double grad_check(const GraphBuilder& build, const std::vector<Tensor>& inputs, double h) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& x : inputs) vars.push_back(tape.leaf(x, true));
    Var root = build(tape, vars);
    if (tape.val(root).size() != 1)
        throw std::logic_error("contract error: grad_check requires a scalar-valued graph");
    tape.backward(root);

    auto eval = [&](const std::vector<Tensor>& xs) {
        Tape t2;
        std::vector<Var> vs;
        for (const Tensor& x : xs) vs.push_back(t2.leaf(x, false));
        return t2.val(build(t2, vs)).item();
    };

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& analytic = tape.grad(vars[k]);
        std::vector<Tensor> probe = inputs;
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            double orig = probe[k][i];
            probe[k][i] = orig + h;
            double fp = eval(probe);
            probe[k][i] = orig - h;
            double fm = eval(probe);
            probe[k][i] = orig;
            double numeric = (fp - fm) / (2.0 * h);
            double err = std::abs(analytic[i] - numeric) / (std::abs(analytic[i]) + 1e-8);
            if (err > worst) worst = err;
        }
    }
    return worst;
}

double grad_check(const std::function<Var(Tape&, Var)>& build, const Tensor& input, double h) {
    return grad_check(
        [&build](Tape& t, const std::vector<Var>& vs) { return build(t, vs[0]); },
        std::vector<Tensor>{input}, h);
}

}  // namespace signx
