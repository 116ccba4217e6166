// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <functional>

#include "depthdiff/core/rng.hpp"
#include "depthdiff/nn/autodiff.hpp"
#include "depthdiff/nn/params.hpp"

using namespace depthdiff;
using namespace depthdiff::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

// Central-difference check of every coordinate of every input against the
// tape gradients.
void check_grads(const std::vector<Tensor>& inputs,
                 const std::function<VarPtr(const std::vector<VarPtr>&)>& build,
                 double tol = 5e-6) {
    std::vector<VarPtr> leaves;
    for (size_t i = 0; i < inputs.size(); ++i)
        leaves.push_back(leaf(inputs[i], "in" + std::to_string(i)));
    VarPtr loss = build(leaves);
    REQUIRE(loss->value.numel() == 1);
    backward(loss);

    auto eval_at = [&](size_t which, size_t coord, double value) {
        std::vector<VarPtr> probe;
        for (size_t i = 0; i < inputs.size(); ++i) {
            Tensor t = inputs[i];
            if (i == which) t.data[coord] = value;
            probe.push_back(constant(std::move(t)));
        }
        return build(probe)->value.data[0];
    };

    for (size_t i = 0; i < inputs.size(); ++i) {
        for (size_t j = 0; j < inputs[i].data.size(); ++j) {
            const double x = inputs[i].data[j];
            const double h = 1e-6 * std::max(1.0, std::abs(x));
            const double fd = (eval_at(i, j, x + h) - eval_at(i, j, x - h)) / (2 * h);
            const double an = leaves[i]->grad.data[j];
            const double denom = std::max({1.0, std::abs(fd), std::abs(an)});
            INFO("input ", i, " coord ", j, " analytic ", an, " fd ", fd);
            CHECK(std::abs(an - fd) / denom <= tol);
        }
    }
}

}  // namespace

TEST_CASE("conv2d gradients (stride 1 and 2, with padding)") {
    Rng rng(1);
    for (int stride : {1, 2}) {
        auto x = random_tensor({2, 4, 6}, rng);
        auto w = random_tensor({3, 2, 3, 3}, rng, 0.5);
        auto b = random_tensor({3}, rng, 0.1);
        check_grads({x, w, b}, [&](const std::vector<VarPtr>& in) {
            return mse(silu(conv2d(in[0], in[1], in[2], stride, 1)),
                       constant(Tensor(conv2d(constant(x), constant(w), constant(b), stride, 1)
                                           ->value.shape)));
        });
    }
}

TEST_CASE("conv2d 1x1 no-pad gradients") {
    Rng rng(2);
    auto x = random_tensor({3, 3, 4}, rng);
    auto w = random_tensor({2, 3, 1, 1}, rng);
    auto b = random_tensor({2}, rng);
    check_grads({x, w, b}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(conv2d(in[0], in[1], in[2], 1, 0)));
    });
}

TEST_CASE("conv_transpose2d doubles spatial size and has exact gradients") {
    Rng rng(3);
    auto x = random_tensor({2, 3, 4}, rng);
    auto w = random_tensor({2, 3, 3, 3}, rng, 0.5);
    auto b = random_tensor({3}, rng, 0.1);

    auto out = conv_transpose2d(constant(x), constant(w), constant(b), 2, 1, 1);
    CHECK(out->value.shape == std::vector<int>{3, 6, 8});

    check_grads({x, w, b}, [](const std::vector<VarPtr>& in) {
        return sum_all(sigmoid(conv_transpose2d(in[0], in[1], in[2], 2, 1, 1)));
    });
}

TEST_CASE("linear, matmul, transpose, softmax gradients") {
    Rng rng(4);
    auto x = random_tensor({5}, rng);
    auto w = random_tensor({3, 5}, rng);
    auto b = random_tensor({3}, rng);
    check_grads({x, w, b}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(linear(in[0], in[1], in[2])));
    });

    auto a = random_tensor({3, 4}, rng);
    auto m = random_tensor({4, 2}, rng);
    check_grads({a, m}, [](const std::vector<VarPtr>& in) {
        return sum_all(mul(softmax_rows(transpose2(matmul(in[0], in[1]))),
                           softmax_rows(transpose2(matmul(in[0], in[1])))));
    });
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(5);
    auto a = constant(random_tensor({6, 9}, rng, 3.0));
    auto p = softmax_rows(a);
    for (int r = 0; r < 6; ++r) {
        double s = 0.0;
        for (int c = 0; c < 9; ++c) s += p->value.at2(r, c);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("pointwise and broadcast op gradients") {
    Rng rng(6);
    auto x = random_tensor({2, 3, 4}, rng);
    auto y = random_tensor({2, 3, 4}, rng);
    auto v = random_tensor({2}, rng);
    auto s = random_tensor({1}, rng);

    check_grads({x, y}, [](const std::vector<VarPtr>& in) {
        return sum_all(mul(silu(in[0]), sigmoid(in[1])));
    });
    check_grads({x, y}, [](const std::vector<VarPtr>& in) {
        return mse(sub(in[0], in[1]), add(in[0], in[1]));
    });
    check_grads({x, v}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(add_channel(in[0], in[1])));
    });
    check_grads({x, v}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(mul_channel(in[0], in[1])));
    });
    check_grads({x, s}, [](const std::vector<VarPtr>& in) {
        return sum_all(sigmoid(scale_var(in[0], in[1])));
    });
}

TEST_CASE("pooling, reshaping and reduction gradients") {
    Rng rng(7);
    auto x = random_tensor({2, 4, 4}, rng);
    check_grads({x}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(avg_pool2d(in[0], 2)));
    });
    check_grads({x}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(global_avg_pool(in[0])));
    });
    check_grads({x}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(mean_channels(in[0])));
    });
    check_grads({x}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(tokens_to_chw(chw_to_tokens(in[0]), 4, 4)));
    });
    auto y = random_tensor({3, 2, 2}, rng);
    check_grads({x, y}, [](const std::vector<VarPtr>& in) {
        return sum_all(silu(concat_ch(avg_pool2d(in[0], 2), in[1])));
    });
}

TEST_CASE("pixel loss matches the closed form and its gradient checks out") {
    Rng rng(8);
    // Constant residual e over n pixels: loss = |e| * sqrt(1 + lambda).
    Tensor pred({1, 4, 5});
    Tensor gt({1, 4, 5});
    for (auto& v : pred.data) v = 0.6;
    for (auto& v : gt.data) v = 0.5;
    auto loss = pixel_loss_op(constant(pred), constant(gt), 0.5);
    CHECK(loss->value.data[0] == doctest::Approx(0.1 * std::sqrt(1.5)).epsilon(1e-12));
    CHECK(loss->value.data[0] == doctest::Approx(0.122474).epsilon(1e-5));

    // lambda = 0 reduces to the RMSE of the residual.
    auto p2 = random_tensor({1, 3, 3}, rng);
    auto g2 = random_tensor({1, 3, 3}, rng);
    double s2 = 0.0;
    for (size_t i = 0; i < p2.data.size(); ++i) {
        const double d = p2.data[i] - g2.data[i];
        s2 += d * d;
    }
    auto rmse = pixel_loss_op(constant(p2), constant(g2), 0.0);
    CHECK(rmse->value.data[0] == doctest::Approx(std::sqrt(s2 / 9.0)).epsilon(1e-12));

    check_grads({p2, g2}, [](const std::vector<VarPtr>& in) {
        return pixel_loss_op(in[0], in[1], 0.5);
    });
}

TEST_CASE("backward accumulates into shared subgraphs") {
    Rng rng(9);
    auto x = random_tensor({4}, rng);
    check_grads({x}, [](const std::vector<VarPtr>& in) {
        auto shared = silu(in[0]);
        return add(sum_all(mul(shared, shared)), sum_all(shared));
    });
}

TEST_CASE("gradients skip frozen parameters but flow through them") {
    Rng rng(10);
    auto x = leaf(random_tensor({3}, rng), "x");
    auto w_frozen = leaf(random_tensor({3, 3}, rng), "w");
    w_frozen->requires_grad = false;
    w_frozen->needs = false;
    auto loss = sum_all(silu(linear(x, w_frozen, nullptr)));
    backward(loss);
    CHECK(w_frozen->grad.data.empty());
    double gsum = 0.0;
    for (double g : x->grad.data) gsum += std::abs(g);
    CHECK(gsum > 0.0);
}

TEST_CASE("adam updates every parameter with a nonzero gradient") {
    Rng rng(11);
    ParamStore store;
    auto a = store.create("a", {3}, rng, 1.0);
    auto b = store.create("b", {2, 3}, rng, 1.0);
    const Tensor a0 = a->value, b0 = b->value;

    store.zero_grad();
    auto loss = sum_all(mul(linear(a, b, nullptr), linear(a, b, nullptr)));
    backward(loss);
    AdamOptimizer adam;
    adam.step(store, 1e-3);

    bool a_changed = false, b_changed = false;
    for (size_t i = 0; i < a0.data.size(); ++i) a_changed |= a0.data[i] != a->value.data[i];
    for (size_t i = 0; i < b0.data.size(); ++i) b_changed |= b0.data[i] != b->value.data[i];
    CHECK(a_changed);
    CHECK(b_changed);
}

TEST_CASE("checkpoint round-trip preserves values and validates shapes") {
    Rng rng(12);
    ParamStore store;
    store.create("conv.w", {2, 3, 3, 3}, rng, 1.0);
    store.create("conv.b", {2}, rng, 1.0);
    const uint64_t sum_before = store.checksum();

    const auto path = std::filesystem::temp_directory_path() / "ddck_test.ckpt";
    save_checkpoint(path, "codec", "schedule.T = 1000\n", store);

    ParamStore reload;
    Rng rng2(999);
    reload.create("conv.w", {2, 3, 3, 3}, rng2, 1.0);
    reload.create("conv.b", {2}, rng2, 1.0);
    CHECK(reload.checksum() != sum_before);
    const std::string cfg = load_checkpoint(path, "codec", reload);
    CHECK(reload.checksum() == sum_before);
    CHECK(cfg == "schedule.T = 1000\n");

    ParamStore wrong;
    Rng rng3(1);
    wrong.create("conv.w", {2, 3, 3, 3}, rng3, 1.0);
    wrong.create("conv.b", {3}, rng3, 1.0);  // shape mismatch
    CHECK_THROWS_AS(load_checkpoint(path, "codec", wrong), input_error);
    CHECK_THROWS_AS(load_checkpoint(path, "denoiser", reload), input_error);
    std::filesystem::remove(path);
}
