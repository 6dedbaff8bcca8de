// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "signx/nn.hpp"
#include "signx/tensor.hpp"

namespace signx {

using GradMap = std::map<std::string, Tensor>;

// AdamW-style optimizer state: first/second moments per parameter plus the
// step counter. Decoupled weight decay; global-norm clipping runs first.
struct OptimizerState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double weight_decay = 0.0;
    double clip_norm = 0.0;  // 0 disables clipping
    std::uint64_t t = 0;
    std::map<std::string, Tensor> m, v;
};

// Scales all gradients by clip/norm when the global L2 norm exceeds clip.
// Returns the pre-clip norm.
double clip_global_norm(GradMap& grads, double clip);

// One bias-corrected update over every parameter present in grads.
// Throws a training-divergence error on non-finite gradients.
void adam_step(ParamStore& params, GradMap grads, OptimizerState& state);

// Builds a scalar graph from leaf inputs; must be deterministic across calls.
using GraphBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Max over all coordinates of |analytic - central difference| /
// (|analytic| + 1e-8). Central differences use step h on fresh tapes.
double grad_check(const GraphBuilder& build, const std::vector<Tensor>& inputs,
                  double h = 1e-5);
double grad_check(const std::function<Var(Tape&, Var)>& build, const Tensor& input,
                  double h = 1e-5);

}  // namespace signx
