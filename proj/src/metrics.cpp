// SPDX-License-Identifier: Apache-2.0
#include "signx/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace signx {

WerResult wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    if (ref.empty()) throw std::invalid_argument("undefined-metric error: empty reference");
    std::size_t n = hyp.size(), m = ref.size();
    // cost[i][j]: edits turning hyp[0..i) into ref[0..j)
    std::vector<std::vector<std::size_t>> cost(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) cost[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) cost[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = cost[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
            std::size_t del = cost[i][j - 1] + 1;  // ref word missing from hyp
            std::size_t ins = cost[i - 1][j] + 1;  // extra hyp word
            cost[i][j] = std::min({sub, del, ins});
        }
    WerResult r;
    r.ref_len = m;
    // backtrace, preferring match/substitution on ties
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 &&
            cost[i][j] == cost[i - 1][j - 1] + (hyp[i - 1] == ref[j - 1] ? 0 : 1)) {
            if (hyp[i - 1] != ref[j - 1]) ++r.substitutions;
            --i;
            --j;
        } else if (j > 0 && cost[i][j] == cost[i][j - 1] + 1) {
            ++r.deletions;
            --j;
        } else {
            ++r.insertions;
            --i;
        }
    }
    r.wer = static_cast<double>(r.substitutions + r.deletions + r.insertions) /
            static_cast<double>(m);
    return r;
}

WerResult wer_corpus(const std::vector<std::vector<std::string>>& hyps,
                     const std::vector<std::vector<std::string>>& refs) {
    if (hyps.size() != refs.size())
        throw std::invalid_argument("dimension error: corpus size mismatch");
    WerResult total;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        WerResult r = wer(hyps[k], refs[k]);
        total.substitutions += r.substitutions;
        total.deletions += r.deletions;
        total.insertions += r.insertions;
        total.ref_len += r.ref_len;
    }
    if (total.ref_len == 0) throw std::invalid_argument("undefined-metric error: empty corpus");
    total.wer = static_cast<double>(total.substitutions + total.deletions + total.insertions) /
                static_cast<double>(total.ref_len);
    return total;
}

namespace {

std::string join_ngram(const std::vector<std::string>& words, std::size_t start, std::size_t n) {
    std::string key;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) key += '\x1f';
        key += words[start + i];
    }
    return key;
}

}  // namespace

std::vector<double> bleu(const std::vector<std::vector<std::string>>& hyps,
                         const std::vector<std::vector<std::string>>& refs,
                         std::size_t max_n) {
    if (hyps.empty() || hyps.size() != refs.size())
        throw std::invalid_argument("undefined-metric error: empty or mismatched corpus");
    std::vector<double> clipped(max_n, 0.0), totals(max_n, 0.0);
    double c = 0.0, r = 0.0;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
        const auto& hyp = hyps[k];
        const auto& ref = refs[k];
        c += static_cast<double>(hyp.size());
        r += static_cast<double>(ref.size());
        for (std::size_t n = 1; n <= max_n; ++n) {
            if (hyp.size() < n) continue;
            std::map<std::string, std::size_t> hyp_counts, ref_counts;
            for (std::size_t i = 0; i + n <= hyp.size(); ++i) ++hyp_counts[join_ngram(hyp, i, n)];
            for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[join_ngram(ref, i, n)];
            for (const auto& [gram, count] : hyp_counts) {
                auto it = ref_counts.find(gram);
                std::size_t limit = it == ref_counts.end() ? 0 : it->second;
                clipped[n - 1] += static_cast<double>(std::min(count, limit));
                totals[n - 1] += static_cast<double>(count);
            }
        }
    }
    double bp = (c > r) ? 1.0 : (c > 0.0 ? std::exp(1.0 - r / c) : 0.0);
    std::vector<double> out(max_n, 0.0);
    for (std::size_t k = 1; k <= max_n; ++k) {
        double log_sum = 0.0;
        bool zero = false;
        for (std::size_t n = 1; n <= k; ++n) {
            double p = totals[n - 1] > 0.0 ? clipped[n - 1] / totals[n - 1] : 0.0;
            if (p <= 0.0) {
                zero = true;
                break;
            }
            log_sum += std::log(p) / static_cast<double>(k);
        }
        out[k - 1] = zero ? 0.0 : bp * std::exp(log_sum);
    }
    return out;
}

double pi_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.empty() || predicted.size() != truth.size())
        throw std::invalid_argument("undefined-metric error: empty or mismatched sample set");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

void write_report_csv(const std::string& path, const std::vector<EvalReport>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("io error: cannot write " + path);
    os << "split,wer,bleu1,bleu2,bleu3,bleu4,pi,S,D,I,N\n";
    os.precision(6);
    os << std::fixed;
    for (const EvalReport& row : rows) {
        os << row.split << ',' << row.wer;
        for (std::size_t n = 0; n < 4; ++n)
            os << ',' << (n < row.bleu.size() ? row.bleu[n] : 0.0);
        os << ',' << row.pi << ',' << row.S << ',' << row.D << ',' << row.I << ',' << row.N
           << '\n';
    }
}

}  // namespace signx
