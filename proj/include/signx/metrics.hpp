// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace signx {

struct WerResult {
    double wer = 0.0;
    std::size_t substitutions = 0;
    std::size_t deletions = 0;
    std::size_t insertions = 0;
    std::size_t ref_len = 0;
};

// Minimal-edit alignment of hypothesis against reference; ties prefer a
// substitution over an insert+delete pair. Empty reference is undefined.
WerResult wer(const std::vector<std::string>& hyp, const std::vector<std::string>& ref);

// Corpus-level aggregate over many utterances (counts summed before dividing).
WerResult wer_corpus(const std::vector<std::vector<std::string>>& hyps,
                     const std::vector<std::vector<std::string>>& refs);

// Corpus BLEU-n for n = 1..max_n: geometric mean of clipped n-gram precisions
// with uniform weights 1/n, times the brevity penalty. A zero precision at
// any order makes that BLEU-n exactly 0.
std::vector<double> bleu(const std::vector<std::vector<std::string>>& hyps,
                         const std::vector<std::vector<std::string>>& refs,
                         std::size_t max_n = 4);

// Micro-averaged exact-match accuracy.
double pi_accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

struct EvalReport {
    std::string split;
    double wer = 0.0;
    std::vector<double> bleu;  // bleu[0] = BLEU-1 ...
    double pi = 0.0;
    std::size_t S = 0, D = 0, I = 0, N = 0;
};

// CSV with header: split,wer,bleu1,bleu2,bleu3,bleu4,pi,S,D,I,N
void write_report_csv(const std::string& path, const std::vector<EvalReport>& rows);

}  // namespace signx
