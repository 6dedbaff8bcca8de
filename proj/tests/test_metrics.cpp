// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "signx/metrics.hpp"
#include "signx/rng.hpp"

using namespace signx;

namespace {

// Independent oracle: plain recursive edit distance, no alignment reuse.
std::size_t edit_distance_brute(const std::vector<std::string>& a,
                                const std::vector<std::string>& b, std::size_t i,
                                std::size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    std::size_t best = edit_distance_brute(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, edit_distance_brute(a, b, i + 1, j) + 1);
    best = std::min(best, edit_distance_brute(a, b, i, j + 1) + 1);
    return best;
}

std::vector<std::string> decode_seq(std::size_t code, std::size_t len) {
    static const char* symbols[3] = {"A", "B", "C"};
    std::vector<std::string> out;
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(symbols[code % 3]);
        code /= 3;
    }
    return out;
}

}  // namespace

TEST_CASE("wer basics") {
    std::vector<std::string> ref = {"A", "B", "C", "D"};
    CHECK(wer(ref, ref).wer == doctest::Approx(0.0));

    WerResult r = wer({"A", "X", "C", "D"}, ref);
    CHECK(r.wer == doctest::Approx(0.25));
    CHECK(r.substitutions == 1);
    CHECK(r.deletions == 0);
    CHECK(r.insertions == 0);

    WerResult del = wer({}, {"A"});
    CHECK(del.wer == doctest::Approx(1.0));
    CHECK(del.deletions == 1);

    CHECK_THROWS(wer({"A"}, {}));
}

TEST_CASE("wer matches exhaustive edit distance on all short pairs") {
    // all hyp/ref pairs of length <= 4 over a 3-symbol alphabet, sampled
    // lengths 5..6 to keep the recursion tractable
    for (std::size_t lh = 0; lh <= 4; ++lh)
        for (std::size_t lr = 1; lr <= 4; ++lr) {
            std::size_t nh = 1;
            for (std::size_t i = 0; i < lh; ++i) nh *= 3;
            std::size_t nr = 1;
            for (std::size_t i = 0; i < lr; ++i) nr *= 3;
            for (std::size_t h = 0; h < nh; ++h)
                for (std::size_t r = 0; r < nr; ++r) {
                    auto hyp = decode_seq(h, lh);
                    auto ref = decode_seq(r, lr);
                    WerResult got = wer(hyp, ref);
                    std::size_t want = edit_distance_brute(hyp, ref, 0, 0);
                    CHECK(got.substitutions + got.deletions + got.insertions == want);
                }
        }
    // spot-check the longer lengths
    Rng rng(41);
    for (int k = 0; k < 200; ++k) {
        auto hyp = decode_seq(rng.next_below(729), 5 + rng.next_below(2));
        auto ref = decode_seq(rng.next_below(729), 5 + rng.next_below(2));
        WerResult got = wer(hyp, ref);
        CHECK(got.substitutions + got.deletions + got.insertions ==
              edit_distance_brute(hyp, ref, 0, 0));
    }
}

TEST_CASE("wer edit counts satisfy the triangle bound") {
    Rng rng(7);
    for (int k = 0; k < 100; ++k) {
        auto a = decode_seq(rng.next_below(243), 1 + rng.next_below(5));
        auto b = decode_seq(rng.next_below(243), 1 + rng.next_below(5));
        auto c = decode_seq(rng.next_below(243), 1 + rng.next_below(5));
        auto edits = [](const std::vector<std::string>& x, const std::vector<std::string>& y) {
            WerResult r = wer(x, y);
            return r.substitutions + r.deletions + r.insertions;
        };
        CHECK(edits(a, c) <= edits(a, b) + edits(b, c));
    }
}

TEST_CASE("bleu identities and the clipped-count case") {
    std::vector<std::vector<std::string>> hyp = {{"A", "B", "C"}};
    auto self_scores = bleu(hyp, hyp, 3);
    for (double s : self_scores) CHECK(s == doctest::Approx(1.0));

    // hyp "A A A" vs ref "A B": clipped unigram precision 1/3, c=3 > r=2 so BP=1
    std::vector<std::vector<std::string>> h2 = {{"A", "A", "A"}};
    std::vector<std::vector<std::string>> r2 = {{"A", "B"}};
    auto scores = bleu(h2, r2, 1);
    CHECK(scores[0] == doctest::Approx(1.0 / 3.0));

    // short candidate: c <= r -> BP = exp(1 - r/c)
    std::vector<std::vector<std::string>> h3 = {{"A"}};
    std::vector<std::vector<std::string>> r3 = {{"A", "B"}};
    auto s3 = bleu(h3, r3, 1);
    CHECK(s3[0] == doctest::Approx(std::exp(1.0 - 2.0) * 1.0));

    Rng rng(13);
    for (int k = 0; k < 50; ++k) {
        std::vector<std::vector<std::string>> h = {decode_seq(rng.next_below(729), 1 + rng.next_below(5))};
        std::vector<std::vector<std::string>> r = {decode_seq(rng.next_below(729), 1 + rng.next_below(5))};
        for (double s : bleu(h, r, 4)) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("pi accuracy counting") {
    CHECK(pi_accuracy({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0));
    CHECK(pi_accuracy({1, 2, 3}, {4, 5, 6}) == doctest::Approx(0.0));
    CHECK(pi_accuracy({1, 2, 3, 4}, {1, 2, 3, 9}) == doctest::Approx(0.75));
    CHECK_THROWS(pi_accuracy({}, {}));
}

TEST_CASE("report csv layout") {
    EvalReport r;
    r.split = "dev";
    r.wer = 0.25;
    r.bleu = {1.0, 0.5, 0.25, 0.125};
    r.pi = 0.5;
    r.S = 1;
    r.N = 4;
    write_report_csv("report_test.csv", {r});
    std::ifstream is("report_test.csv");
    std::string header, line;
    std::getline(is, header);
    std::getline(is, line);
    CHECK(header == "split,wer,bleu1,bleu2,bleu3,bleu4,pi,S,D,I,N");
    CHECK(line.substr(0, 4) == "dev,");
    std::remove("report_test.csv");
}
