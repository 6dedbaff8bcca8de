// SPDX-License-Identifier: Apache-2.0
#include "signx/latent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "signx/codebook.hpp"
#include "signx/rng.hpp"

namespace signx {

std::vector<double> cross_cov(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& mu) {
    if (a.size() != b.size() || a.size() != mu.size())
        throw std::invalid_argument("dimension error: cross_cov width mismatch");
    std::vector<double> c(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) c[d] = (a[d] - mu[d]) * (b[d] - mu[d]);
    return c;
}

int gloss_align(std::size_t t, const std::vector<GlossSpan>& spans) {
    int best = kPad;
    std::uint32_t best_start = 0;
    bool found = false;
    for (const GlossSpan& s : spans) {
        if (t >= s.start && t <= s.end) {
            if (!found || s.start < best_start) {
                best = static_cast<int>(s.gloss);
                best_start = s.start;
                found = true;
            }
        }
    }
    return best;
}

LatentSequence compile(const LatentSequence& seq, const CompileConfig& cfg) {
    std::size_t T = seq.frames();
    if (T == 0) throw std::invalid_argument("contract error: compile on empty sequence");
    std::size_t d = seq.width();

    LatentSequence out = seq;
    out.alignment.assign(T, kPad);
    if (out.mask.size() != T) out.mask.assign(T, 1);

    std::vector<double> mu(d, 0.0);
    std::vector<double> prev(d, 0.0);
    constexpr double eps = 1e-8;

    for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> row(d);
        for (std::size_t c = 0; c < d; ++c) row[c] = out.z.at(t, c);

        if (out.mask[t]) {
            double mean = 0.0;
            for (double v : row) mean += v;
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (double v : row) var += (v - mean) * (v - mean);
            var /= static_cast<double>(d);
            double inv = 1.0 / std::sqrt(var + eps);
            for (double& v : row) v = (v - mean) * inv;

            for (std::size_t c = 0; c < d; ++c)
                mu[c] = cfg.ema_decay * mu[c] + (1.0 - cfg.ema_decay) * row[c];

            if (t > 0 && cfg.gamma != 0.0) {
                std::vector<double> c_t = cross_cov(row, prev, mu);
                for (std::size_t c = 0; c < d; ++c) row[c] -= cfg.gamma * c_t[c];
            }
        } else {
            std::fill(row.begin(), row.end(), 0.0);
        }

        // frame drop is a pure function of (seed, t)
        if (out.mask[t] && cfg.rho > 0.0 &&
            Rng::child(cfg.seed, "frame-drop", t).next_double() < cfg.rho) {
            std::fill(row.begin(), row.end(), 0.0);
            out.mask[t] = 0;
        }

        out.alignment[t] = gloss_align(t, out.spans);
        for (std::size_t c = 0; c < d; ++c) out.z.at(t, c) = row[c];
        prev = row;
    }
    return out;
}

PruneMask build_prune_mask(const std::vector<LatentSequence>& batch, double tau_p) {
    if (batch.empty()) throw std::invalid_argument("contract error: prune mask on empty batch");
    std::size_t d = batch[0].width();
    std::vector<double> sum(d, 0.0), sumsq(d, 0.0);
    std::size_t n = 0;
    for (const LatentSequence& seq : batch) {
        if (seq.width() != d)
            throw std::invalid_argument("dimension error: mixed widths in prune batch");
        for (std::size_t t = 0; t < seq.frames(); ++t) {
            if (t < seq.mask.size() && !seq.mask[t]) continue;
            ++n;
            for (std::size_t c = 0; c < d; ++c) {
                double v = seq.z.at(t, c);
                sum[c] += v;
                sumsq[c] += v * v;
            }
        }
    }
    if (n < 2)
        throw std::runtime_error("insufficient-data error: prune mask needs >= 2 valid frames");
    PruneMask m;
    m.tau_p = tau_p;
    m.keep.assign(d, 0);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = sum[c] / static_cast<double>(n);
        double var = (sumsq[c] - static_cast<double>(n) * mean * mean) /
                     static_cast<double>(n - 1);
        if (var < 0.0) var = 0.0;  // numeric guard
        if (var >= tau_p) {
            m.keep[c] = 1;
            ++m.effective_width;
        }
    }
    return m;
}

Tensor apply_mask(const Tensor& z, const PruneMask& mask) {
    if (z.cols() != mask.keep.size())
        throw std::invalid_argument("dimension error: prune mask width");
    Tensor out = z;
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t c = 0; c < z.cols(); ++c)
            if (!mask.keep[c]) out.at(r, c) = 0.0;
    return out;
}

namespace {

std::vector<GlossSpan> rescale_spans(const std::vector<GlossSpan>& spans, double factor,
                                     std::uint32_t new_frames) {
    std::vector<GlossSpan> out;
    out.reserve(spans.size());
    std::uint32_t prev_end = 0;
    bool first = true;
    for (const GlossSpan& s : spans) {
        GlossSpan r = s;
        r.start = static_cast<std::uint32_t>(std::floor(s.start * factor));
        r.end = static_cast<std::uint32_t>(std::ceil(s.end * factor));
        if (r.end >= new_frames) r.end = new_frames - 1;
        if (r.start >= new_frames) r.start = new_frames - 1;
        // outward rounding may overrun the previous span; pull back to a
        // shared boundary frame at most
        if (!first && r.start < prev_end) r.start = prev_end;
        if (r.end < r.start) r.end = r.start;
        prev_end = r.end;
        first = false;
        out.push_back(r);
    }
    return out;
}

}  // namespace

std::vector<FeatureRecord> augment(std::size_t sample_id, const LatentSequence& source,
                                   const AugmentConfig& cfg, std::uint64_t seed) {
    if (cfg.folds < 1) throw std::invalid_argument("parameter error: augment folds must be >= 1");
    if (cfg.scale_lo <= 0.0 || cfg.scale_hi < cfg.scale_lo)
        throw std::invalid_argument("parameter error: augment scale range");
    std::size_t T = source.frames(), d = source.width();
    std::vector<FeatureRecord> out;
    out.reserve(cfg.folds);

    for (std::size_t j = 0; j < cfg.folds; ++j) {
        Rng rng = Rng::child(seed, "augment/" + std::to_string(sample_id) + "_" +
                                       std::to_string(j));
        double factor = rng.uniform(cfg.scale_lo, cfg.scale_hi);
        std::size_t Tn = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(static_cast<double>(T) * factor)));

        LatentSequence aug;
        aug.z = Tensor({Tn, d});
        aug.mask.assign(Tn, 1);
        for (std::size_t t = 0; t < Tn; ++t) {
            double pos = Tn == 1 ? 0.0
                                 : static_cast<double>(t) * static_cast<double>(T - 1) /
                                       static_cast<double>(Tn - 1);
            std::size_t lo = static_cast<std::size_t>(pos);
            std::size_t hi = std::min(lo + 1, T - 1);
            double frac = pos - static_cast<double>(lo);
            for (std::size_t c = 0; c < d; ++c) {
                double v = source.z.at(lo, c);
                if (frac != 0.0) v = (1.0 - frac) * v + frac * source.z.at(hi, c);
                aug.z.at(t, c) = v;
            }
        }
        double effective = T == 1 ? 1.0
                                  : static_cast<double>(Tn == 1 ? 1 : Tn - 1) /
                                        static_cast<double>(T - 1);
        aug.spans = rescale_spans(source.spans, effective, static_cast<std::uint32_t>(Tn));

        for (std::size_t t = 0; t < Tn; ++t) {
            if (cfg.jitter_prob > 0.0 && rng.bernoulli(cfg.jitter_prob)) {
                double offset = rng.uniform(-cfg.jitter_mag, cfg.jitter_mag);
                for (std::size_t c = 0; c < d; ++c) aug.z.at(t, c) += offset;
            }
        }
        if (cfg.noise_var > 0.0) {
            double stddev = std::sqrt(cfg.noise_var);
            for (std::size_t t = 0; t < Tn; ++t)
                for (std::size_t c = 0; c < d; ++c) aug.z.at(t, c) += rng.normal(0.0, stddev);
        }

        out.push_back(to_record(std::to_string(sample_id) + "_" + std::to_string(j), aug));
    }
    return out;
}

FeatureRecord to_record(const std::string& key, const LatentSequence& seq) {
    FeatureRecord r;
    r.key = key;
    r.frames = static_cast<std::uint32_t>(seq.frames());
    r.dim = static_cast<std::uint32_t>(seq.width());
    r.spans = seq.spans;
    r.features.resize(static_cast<std::size_t>(r.frames) * r.dim);
    for (std::size_t i = 0; i < r.features.size(); ++i)
        r.features[i] = static_cast<float>(seq.z[i]);
    return r;
}

LatentSequence from_record(const FeatureRecord& record) {
    LatentSequence seq;
    seq.z = Tensor({record.frames, record.dim});
    for (std::size_t i = 0; i < record.features.size(); ++i)
        seq.z[i] = static_cast<double>(record.features[i]);
    seq.spans = record.spans;
    seq.mask.assign(record.frames, 1);
    seq.alignment.resize(record.frames);
    for (std::size_t t = 0; t < record.frames; ++t)
        seq.alignment[t] = gloss_align(t, seq.spans);
    return seq;
}

}  // namespace signx
