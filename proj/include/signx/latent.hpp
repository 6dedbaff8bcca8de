// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "signx/container.hpp"
#include "signx/tensor.hpp"

namespace signx {

// Per-frame latent block with gloss alignment and validity mask.
struct LatentSequence {
    Tensor z;                      // [T x d]
    std::vector<int> alignment;    // gloss index per frame (PAD when uncovered)
    std::vector<std::uint8_t> mask;  // 1 = valid frame
    std::vector<GlossSpan> spans;  // sorted by start, inclusive ends

    std::size_t frames() const { return z.rows(); }
    std::size_t width() const { return z.cols(); }
};

struct CompileConfig {
    double gamma = 0.0;   // covariance whitening coefficient
    double rho = 0.0;     // stochastic frame-drop probability
    std::uint64_t seed = 0;
    double ema_decay = 0.99;  // running-mean estimator for the whitening term
};

// Elementwise cross-covariance of two centered frames.
// c[d] = (a[d] - mu[d]) * (b[d] - mu[d])
std::vector<double> cross_cov(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& mu);

// Gloss covering frame t; earliest-starting span wins shared boundaries,
// PAD when no span covers t.
int gloss_align(std::size_t t, const std::vector<GlossSpan>& spans);

// Per frame: layer normalization, covariance whitening against the previous
// processed frame (skipped at t=0), stochastic frame drop, gloss alignment.
// Drop decisions are a pure function of (cfg.seed, t).
LatentSequence compile(const LatentSequence& seq, const CompileConfig& cfg);

struct PruneMask {
    std::vector<std::uint8_t> keep;  // 1 = variance >= tau_p
    double tau_p = 0.0;
    std::size_t effective_width = 0;
};

// Unbiased per-dimension variance over all valid (mask=1) frames of the
// batch; dimensions below tau_p are masked out.
PruneMask build_prune_mask(const std::vector<LatentSequence>& batch, double tau_p);

// Elementwise z * M, shape preserved.
Tensor apply_mask(const Tensor& z, const PruneMask& mask);

struct AugmentConfig {
    std::size_t folds = 10;
    double scale_lo = 0.8;
    double scale_hi = 1.2;
    double jitter_prob = 0.3;
    double jitter_mag = 0.02;
    double noise_var = 0.01;
};

// N augmented copies of one sample, keyed "<id>_<j>". Each fold applies
// temporal rescaling (linear interpolation, spans rounded outward), per-frame
// jitter, and additive Gaussian noise; fold j is a pure function of
// (seed, sample id, j).
std::vector<FeatureRecord> augment(std::size_t sample_id, const LatentSequence& source,
                                   const AugmentConfig& cfg, std::uint64_t seed);

// Conversions between the in-memory sequence and container records.
FeatureRecord to_record(const std::string& key, const LatentSequence& seq);
LatentSequence from_record(const FeatureRecord& record);

}  // namespace signx
