// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "signx/autodiff.hpp"
#include "signx/checkpoint.hpp"
#include "signx/nn.hpp"
#include "signx/optim.hpp"
#include "signx/rng.hpp"

using namespace signx;

TEST_CASE("matmul identity and hand-evaluated product") {
    Tape t;
    Var I = t.constant(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    Var A = t.constant(Tensor({3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    Var IA = matmul(I, A);
    for (std::size_t i = 0; i < 9; ++i) CHECK(t.val(IA)[i] == doctest::Approx(t.val(A)[i]));

    Var B = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    Var ones = t.constant(Tensor({2, 1}, {1, 1}));
    Var prod = matmul(B, ones);
    CHECK(t.val(prod)[0] == doctest::Approx(3.0));
    CHECK(t.val(prod)[1] == doctest::Approx(7.0));
}

TEST_CASE("matmul gradient equals ones x B^T") {
    Tensor Aval({2, 3}, {0.5, -1.0, 2.0, 1.5, 0.25, -0.75});
    Tensor Bval({3, 2}, {1.0, 2.0, -0.5, 0.75, 3.0, -1.25});
    Tape t;
    Var A = t.leaf(Aval, true);
    Var B = t.leaf(Bval, false);
    Var loss = sum(matmul(A, B));
    t.backward(loss);
    const Tensor& gA = t.grad(A);
    // d sum(AB) / dA = ones * B^T
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) {
            double expect = Bval.at(c, 0) + Bval.at(c, 1);
            CHECK(gA.at(r, c) == doctest::Approx(expect));
        }
    double err = grad_check(
        [&](Tape& tp, Var a) { return sum(matmul(a, tp.constant(Bval))); }, Aval);
    CHECK(err < 1e-6);
}

TEST_CASE("layer_norm edge cases") {
    Tape t;
    Var gain = t.constant(Tensor({1, 4}, {1, 1, 1, 1}));
    Var bias = t.constant(Tensor({1, 4}, {0, 0, 0, 0}));

    Var constant_in = t.constant(Tensor({1, 4}, {5, 5, 5, 5}));
    Var y = layer_norm_rows(constant_in, gain, bias, 1e-8);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t.val(y)[i] == doctest::Approx(0.0));

    Var pm = t.constant(Tensor({1, 2}, {1, -1}));
    Var g2 = t.constant(Tensor({1, 2}, {1, 1}));
    Var b2 = t.constant(Tensor({1, 2}, {0, 0}));
    Var y2 = layer_norm_rows(pm, g2, b2, 1e-12);
    CHECK(t.val(y2)[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(t.val(y2)[1] == doctest::Approx(-1.0).epsilon(1e-5));

    Var zero_gain = t.constant(Tensor({1, 4}, {0, 0, 0, 0}));
    Var bias_only = t.constant(Tensor({1, 4}, {2, -1, 0.5, 7}));
    Var x = t.constant(Tensor({1, 4}, {0.3, -2.0, 1.1, 4.4}));
    Var y3 = layer_norm_rows(x, zero_gain, bias_only, 1e-8);
    CHECK(t.val(y3)[0] == doctest::Approx(2.0));
    CHECK(t.val(y3)[3] == doctest::Approx(7.0));
}

TEST_CASE("layer_norm output statistics before affine") {
    Rng rng(17);
    Tensor x({1, 32});
    for (std::size_t i = 0; i < 32; ++i) x[i] = rng.uniform(-3, 3);
    Tape t;
    Var y = layer_norm_rows(t.constant(x), t.constant(Tensor::full({1, 32}, 1.0)),
                            t.constant(Tensor({1, 32})), 1e-10);
    double mean = 0, var = 0;
    for (std::size_t i = 0; i < 32; ++i) mean += t.val(y)[i];
    mean /= 32;
    for (std::size_t i = 0; i < 32; ++i) {
        double d = t.val(y)[i] - mean;
        var += d * d;
    }
    var /= 32;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-6);
}

TEST_CASE("softmax values, normalization and shift invariance") {
    Tape t;
    Var u = softmax_rows(t.constant(Tensor({1, 5}, {2, 2, 2, 2, 2})));
    for (std::size_t i = 0; i < 5; ++i) CHECK(t.val(u)[i] == doctest::Approx(0.2));

    Var p = softmax_rows(t.constant(Tensor({1, 2}, {0.0, std::log(3.0)})));
    CHECK(t.val(p)[0] == doctest::Approx(0.25));
    CHECK(t.val(p)[1] == doctest::Approx(0.75));

    Rng rng(3);
    Tensor x({1, 7});
    for (std::size_t i = 0; i < 7; ++i) x[i] = rng.uniform(-4, 4);
    Tensor xs = x;
    for (std::size_t i = 0; i < 7; ++i) xs[i] += 123.5;
    Var a = softmax_rows(t.constant(x));
    Var b = softmax_rows(t.constant(xs));
    double total = 0;
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(t.val(a)[i] == doctest::Approx(t.val(b)[i]).epsilon(1e-12));
        total += t.val(a)[i];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("adam_step fixed point, first step size, and clipping") {
    ParamStore ps;
    ps.def_const("p", {1, 1}, 1.0);
    OptimizerState st;
    st.lr = 0.1;
    st.weight_decay = 0.0;

    GradMap zero;
    zero["p"] = Tensor::scalar(0.0);
    adam_step(ps, zero, st);
    CHECK(ps.get("p").item() == doctest::Approx(1.0));

    ParamStore ps2;
    ps2.def_const("p", {1, 1}, 1.0);
    OptimizerState st2;
    st2.lr = 0.1;
    GradMap g;
    g["p"] = Tensor::scalar(1.0);
    adam_step(ps2, g, st2);
    // bias-corrected first step moves by ~lr
    CHECK(ps2.get("p").item() == doctest::Approx(0.9).epsilon(1e-6));

    GradMap big;
    big["a"] = Tensor({1, 2}, {6.0, 8.0});                  // norm 10
    big["b"] = Tensor({1, 2}, {std::sqrt(96.0), 0.0});      // global norm 14
    double norm = clip_global_norm(big, 7.0);
    CHECK(norm == doctest::Approx(14.0));
    CHECK(big["a"][0] == doctest::Approx(3.0));
    CHECK(big["a"][1] == doctest::Approx(4.0));
}

TEST_CASE("adam_step rejects NaN gradients") {
    ParamStore ps;
    ps.def_const("p", {1, 1}, 1.0);
    OptimizerState st;
    GradMap g;
    g["p"] = Tensor::scalar(std::nan(""));
    CHECK_THROWS(adam_step(ps, g, st));
}

TEST_CASE("grad_check on x^2 and assorted ops") {
    double err = grad_check([](Tape&, Var x) { return square(x); }, Tensor::scalar(3.0));
    CHECK(err < 1e-6);
    {
        Tape t;
        Var x = t.leaf(Tensor::scalar(3.0), true);
        Var y = square(x);
        t.backward(y);
        CHECK(t.grad(x).item() == doctest::Approx(6.0));
    }

    Rng rng(11);
    Tensor x({2, 6});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-2, 2);
    Tensor gain({1, 6}), bias({1, 6});
    for (std::size_t i = 0; i < 6; ++i) {
        gain[i] = rng.uniform(0.5, 1.5);
        bias[i] = rng.uniform(-0.5, 0.5);
    }

    CHECK(grad_check(
              [&](Tape& t, const std::vector<Var>& v) {
                  return sum(square(layer_norm_rows(v[0], v[1], v[2], 1e-5)));
              },
              {x, gain, bias}) < 1e-4);
    CHECK(grad_check([](Tape&, Var v) { return sum(square(softmax_rows(v))); }, x) < 1e-4);
    Tensor cst({2, 6});
    for (std::size_t i = 0; i < cst.size(); ++i) cst[i] = rng.uniform(-1, 1);
    CHECK(grad_check(
              [&](Tape& t, Var v) { return sum(mul(t.constant(cst), log_softmax_rows(v))); },
              x) < 1e-4);
    CHECK(grad_check([](Tape&, Var v) { return sum(mul(tanh(v), sigmoid(v))); }, x) < 1e-4);
    CHECK(grad_check([](Tape&, Var v) { return sum(max_pool2_rows(relu(v))); }, x) < 1e-4);
    CHECK(grad_check([](Tape&, Var v) { return sum(unfold_rows_replicate(v, 3)); }, x) < 1e-4);
    CHECK(grad_check([](Tape&, Var v) { return mean(square(mean_rows(v))); }, x) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, const std::vector<Var>& v) {
                  return sum(square(batch_norm_rows(v[0], v[1], v[2], 1e-5)));
              },
              {x, gain, bias}) < 1e-4);
}

TEST_CASE("grad_check rejects non-scalar graphs") {
    CHECK_THROWS(grad_check([](Tape&, Var x) { return add(x, x); }, Tensor({1, 2}, {1, 2})));
}

TEST_CASE("forward determinism") {
    Rng rng(5);
    Tensor x({3, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
    auto run = [&]() {
        Tape t;
        Var v = t.constant(x);
        Var y = sum(softmax_rows(matmul(v, transpose(v))));
        return t.val(y).item();
    };
    double a = run(), b = run();
    CHECK(a == b);
}

TEST_CASE("checkpoint round trip preserves names, shapes and bytes") {
    ParamStore ps;
    ps.def_linear("m/weight", {4, 3}, 99);
    ps.def_const("m/bias", {1, 3}, 0.25);
    ps.def_linear("other/table", {5, 2}, 99);

    std::string path = "ckpt_roundtrip.sxck";
    save_checkpoint(path, ps);
    ParamStore back = load_checkpoint(path);
    CHECK(back.count() == 3);
    for (const auto& name : ps.names()) {
        const Tensor& a = ps.get(name);
        const Tensor& b = back.get(name);
        REQUIRE(a.same_shape(b));
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }
    // identical content -> identical bytes
    save_checkpoint("ckpt_roundtrip2.sxck", back);
    CHECK(file_checksum(path) == file_checksum("ckpt_roundtrip2.sxck"));
    std::remove(path.c_str());
    std::remove("ckpt_roundtrip2.sxck");
}

TEST_CASE("mismatched matmul raises dimension error") {
    Tape t;
    Var a = t.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
    Var b = t.constant(Tensor({2, 2}, {1, 2, 3, 4}));
    CHECK_THROWS(matmul(a, b));
}
