#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "olfact/nn.hpp"
#include "olfact/tensor.hpp"

using namespace olfact;
using testutil::max_grad_rel_error;
using testutil::random_tensor;

namespace {
constexpr double kGradTol = 1e-3;
}

TEST_CASE("product rule on scalars") {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor y = Tensor::scalar(-2.0, true);
    Tensor z = mul(x, y);
    z.backward();
    CHECK(x.grad()[0] == doctest::Approx(-2.0));
    CHECK(y.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("backward requires a scalar") {
    Tensor x = Tensor::zeros({2, 2}, true);
    CHECK_THROWS_AS(x.backward(), NumericError);
}

TEST_CASE("grad accumulation doubles without reset") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor loss = mul(x, x);
    loss.backward();
    const double once = x.grad()[0];
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(2.0 * once));
    x.zero_grad();
    loss.backward();
    CHECK(x.grad()[0] == doctest::Approx(once));
}

TEST_CASE("parameters unreachable from the loss keep zero gradients") {
    Tensor used = Tensor::scalar(1.5, true);
    Tensor unused = Tensor::scalar(4.0, true);
    Tensor loss = mul(used, used);
    loss.backward();
    CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("elementwise op gradients") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 1);
        Tensor a = random_tensor({4, 5}, rng);
        Tensor b = random_tensor({4, 5}, rng);
        auto check = [&](const std::function<Tensor()>& f, std::vector<Tensor> params) {
            CHECK(max_grad_rel_error(f, std::move(params)) < kGradTol);
        };
        check([&] { return sum_all(mul(add(a, b), sub(a, b))); }, {a, b});
        check([&] { return sum_all(gelu(a)); }, {a});
        check([&] { return sum_all(sigmoid(a)); }, {a});
        check([&] { return sum_all(tanh_op(a)); }, {a});
        check([&] { return mean_all(mul(scale(a, 1.7), add_scalar(b, 0.3))); }, {a, b});
        check([&] { return sum_all(mul(neg(a), a)); }, {a});
    }
}

TEST_CASE("relu and abs gradients away from the kink") {
    Rng rng(11);
    Tensor a = random_tensor({6, 6}, rng);
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::fabs(a.data()[i]) < 1e-3) a.data()[i] = 0.5;  // keep clear of the kink
    CHECK(max_grad_rel_error([&] { return sum_all(relu(a)); }, {a}) < kGradTol);
    CHECK(max_grad_rel_error([&] { return sum_all(abs_op(a)); }, {a}) < kGradTol);
    CHECK(max_grad_rel_error([&] { return sum_all(clamp_min(a, 0.25)); }, {a}) < 2e-3);
}

TEST_CASE("matmul and linear gradients") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        Tensor a = random_tensor({3, 4}, rng);
        Tensor b = random_tensor({4, 5}, rng);
        CHECK(max_grad_rel_error([&] { return sum_all(matmul(a, b)); }, {a, b}) < kGradTol);

        Tensor x = random_tensor({2, 7, 4}, rng);
        Tensor w = random_tensor({6, 4}, rng);
        Tensor bias = random_tensor({6}, rng);
        CHECK(max_grad_rel_error([&] { return mean_all(gelu(linear(x, w, bias))); },
                                 {x, w, bias}) < kGradTol);
        CHECK(max_grad_rel_error([&] { return mean_all(tanh_op(linear_no_bias(x, w))); },
                                 {x, w}) < kGradTol);
    }
}

TEST_CASE("batched matmul gradients") {
    Rng rng(55);
    Tensor a = random_tensor({2, 3, 4, 5}, rng);
    Tensor b = random_tensor({2, 3, 5, 6}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(batched_matmul(a, b)); }, {a, b}) < kGradTol);
    Tensor c = random_tensor({2, 3, 7, 5}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(batched_matmul_nt(a, c)); }, {a, c}) <
          kGradTol);
}

TEST_CASE("softmax and log_softmax gradients and values") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(200 + seed);
        Tensor x = random_tensor({5, 8}, rng, 2.0);
        Tensor w = random_tensor({5, 8}, rng, 1.0, false);
        CHECK(max_grad_rel_error(
                  [&] { return weighted_sum(softmax_lastdim(x), w.values()); }, {x}) < kGradTol);
        CHECK(max_grad_rel_error(
                  [&] { return weighted_sum(log_softmax_lastdim(x), w.values()); }, {x}) <
              kGradTol);

        Tensor p = softmax_lastdim(x);
        for (std::size_t r = 0; r < 5; ++r) {
            double total = 0.0;
            for (std::size_t j = 0; j < 8; ++j) total += p.data()[r * 8 + j];
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("layer norm gradient and normalization") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(300 + seed);
        Tensor x = random_tensor({4, 9}, rng, 3.0);
        Tensor gamma = random_tensor({9}, rng, 0.5);
        Tensor beta = random_tensor({9}, rng, 0.5);
        CHECK(max_grad_rel_error([&] { return mean_all(mul(layer_norm(x, gamma, beta),
                                                           layer_norm(x, gamma, beta))); },
                                 {x, gamma, beta}) < kGradTol);
    }
    // unit gamma, zero beta: rows come out zero-mean unit-variance
    Rng rng(301);
    Tensor x = random_tensor({3, 16}, rng, 5.0);
    Tensor ones = Tensor::from_data({16}, std::vector<double>(16, 1.0));
    Tensor zeros = Tensor::zeros({16});
    Tensor y = layer_norm(x, ones, zeros);
    for (std::size_t r = 0; r < 3; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 16; ++j) mean += y.data()[r * 16 + j];
        mean /= 16.0;
        for (std::size_t j = 0; j < 16; ++j)
            var += (y.data()[r * 16 + j] - mean) * (y.data()[r * 16 + j] - mean);
        CHECK(std::fabs(mean) < 1e-9);
        CHECK(var / 16.0 == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("conv1d gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(400 + seed);
        Tensor x = random_tensor({2, 3, 11}, rng);
        Tensor w = random_tensor({4, 3, 5}, rng, 0.5);
        Tensor b = random_tensor({4}, rng, 0.1);
        CHECK(max_grad_rel_error([&] { return mean_all(tanh_op(conv1d_same(x, w, b))); },
                                 {x, w, b}) < kGradTol);
    }
}

TEST_CASE("conv1d same padding matches a hand-rolled convolution") {
    Rng rng(401);
    Tensor x = random_tensor({1, 2, 7}, rng);
    Tensor w = random_tensor({1, 2, 3}, rng);
    Tensor b = random_tensor({1}, rng);
    Tensor y = conv1d_same(x, w, b);
    REQUIRE(y.shape() == Shape{1, 1, 7});
    for (int t = 0; t < 7; ++t) {
        double expect = b.data()[0];
        for (int ci = 0; ci < 2; ++ci)
            for (int k = 0; k < 3; ++k) {
                const int s = t + k - 1;
                if (s < 0 || s >= 7) continue;
                expect += x.data()[ci * 7 + s] * w.data()[ci * 3 + k];
            }
        CHECK(y.data()[t] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("batch norm gradients in training and eval mode") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(500 + seed);
        Tensor x = random_tensor({6, 3}, rng, 2.0);
        Tensor gamma = random_tensor({3}, rng, 0.5);
        Tensor beta = random_tensor({3}, rng, 0.5);
        std::vector<double> rm(3, 0.0), rv(3, 1.0);
        CHECK(max_grad_rel_error(
                  [&] {
                      auto rm2 = rm;  // keep buffers untouched across fd calls
                      auto rv2 = rv;
                      return mean_all(
                          mul(batch_norm(x, gamma, beta, rm2, rv2, true),
                              batch_norm(x, gamma, beta, rm2, rv2, true)));
                  },
                  {x, gamma, beta}) < kGradTol);
        std::vector<double> rm3{0.1, -0.2, 0.3}, rv3{1.5, 0.7, 2.0};
        CHECK(max_grad_rel_error(
                  [&] {
                      auto rmc = rm3;
                      auto rvc = rv3;
                      return mean_all(tanh_op(batch_norm(x, gamma, beta, rmc, rvc, false)));
                  },
                  {x, gamma, beta}) < kGradTol);
    }
    // rank-3 (B,C,T) path
    Rng rng(501);
    Tensor x3 = random_tensor({3, 2, 5}, rng);
    Tensor g = random_tensor({2}, rng, 0.3);
    Tensor be = random_tensor({2}, rng, 0.3);
    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    CHECK(max_grad_rel_error(
              [&] {
                  auto a = rm, b = rv;
                  return mean_all(mul(batch_norm(x3, g, be, a, b, true),
                                      batch_norm(x3, g, be, a, b, true)));
              },
              {x3, g, be}) < kGradTol);
}

TEST_CASE("shape op gradients") {
    Rng rng(600);
    Tensor x = random_tensor({2, 6, 8}, rng);
    Tensor w = random_tensor({2 * 6 * 8}, rng, 1.0, false);
    auto flat = w.values();
    CHECK(max_grad_rel_error([&] { return weighted_sum(reshape(x, {96}), flat); }, {x}) <
          kGradTol);
    CHECK(max_grad_rel_error(
              [&] { return weighted_sum(merge_heads(split_heads(x, 4)), flat); }, {x}) < kGradTol);
    CHECK(max_grad_rel_error(
              [&] {
                  return weighted_sum(channel_to_time_major(time_to_channel_major(x)), flat);
              },
              {x}) < kGradTol);

    Tensor front = random_tensor({2, 8}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(concat_time(front, x)); }, {front, x}) <
          kGradTol);
    CHECK(max_grad_rel_error([&] { return mean_all(select_time(x, 3)); }, {x}) < kGradTol);

    Tensor a = random_tensor({4, 3}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(mul(concat_cols(a, b), concat_cols(a, b))); },
                             {a, b}) < kGradTol);
    CHECK(max_grad_rel_error([&] { return mean_all(slice_cols(b, 1, 3)); }, {b}) < kGradTol);

    Tensor row = random_tensor({5}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(mul(tile_rows(row, 7), tile_rows(row, 7))); },
                             {row}) < kGradTol);

    std::vector<bool> cond{true, false, true, false};
    CHECK(max_grad_rel_error(
              [&] { return mean_all(mul(where_rows(cond, a, a), where_rows(cond, a, a))); },
              {a}) < kGradTol);
    Tensor a2 = random_tensor({4, 3}, rng);
    CHECK(max_grad_rel_error([&] { return mean_all(where_rows(cond, a, a2)); }, {a, a2}) <
          kGradTol);

    std::vector<Tensor> steps{random_tensor({3, 4}, rng), random_tensor({3, 4}, rng),
                              random_tensor({3, 4}, rng)};
    CHECK(max_grad_rel_error(
              [&] { return mean_all(mul(stack_time(steps), stack_time(steps))); },
              {steps[0], steps[1], steps[2]}) < kGradTol);
}

TEST_CASE("pooling and normalization gradients") {
    Rng rng(700);
    Tensor x = random_tensor({3, 6, 4}, rng);
    std::vector<std::vector<bool>> valid{{true, true, true, true, false, false},
                                         {true, true, true, true, true, true},
                                         {true, false, false, false, false, false}};
    // lengths 4, 6, 1 expressed as validity masks
    valid[2][0] = true;
    CHECK(max_grad_rel_error(
              [&] { return mean_all(mul(masked_mean_pool(x, valid), masked_mean_pool(x, valid))); },
              {x}) < kGradTol);

    Tensor z = random_tensor({5, 7}, rng);
    CHECK(max_grad_rel_error(
              [&] { return mean_all(mul(l2_normalize_rows(z), add_scalar(l2_normalize_rows(z), 0.2))); },
              {z}) < kGradTol);
}

TEST_CASE("masked mean pool values") {
    // no padding -> plain mean; single valid token -> that token
    Tensor x = Tensor::from_data({2, 3, 2}, {1, 2, 3, 4, 5, 6,  //
                                             10, 20, 30, 40, 50, 60});
    std::vector<std::vector<bool>> all_valid{{true, true, true}, {true, true, true}};
    Tensor mean = masked_mean_pool(x, all_valid);
    CHECK(mean.data()[0] == doctest::Approx(3.0));
    CHECK(mean.data()[1] == doctest::Approx(4.0));
    CHECK(mean.data()[2] == doctest::Approx(30.0));

    std::vector<std::vector<bool>> single{{false, true, false}, {true, false, false}};
    Tensor tok = masked_mean_pool(x, single);
    CHECK(tok.data()[0] == doctest::Approx(3.0));
    CHECK(tok.data()[1] == doctest::Approx(4.0));
    CHECK(tok.data()[2] == doctest::Approx(10.0));
    CHECK(tok.data()[3] == doctest::Approx(20.0));
}

TEST_CASE("masked mean pool equals truncated input mean") {
    Rng rng(701);
    Tensor x = random_tensor({1, 8, 3}, rng);
    // zero-pad the tail; pooling over the valid prefix must equal pooling the
    // truncated tensor
    for (std::size_t t = 5; t < 8; ++t)
        for (std::size_t j = 0; j < 3; ++j) x.data()[t * 3 + j] = 0.0;
    std::vector<std::vector<bool>> prefix{{true, true, true, true, true, false, false, false}};
    Tensor pooled = masked_mean_pool(x, prefix);

    Tensor trunc = Tensor::from_data({1, 5, 3},
                                     std::vector<double>(x.data(), x.data() + 15));
    std::vector<std::vector<bool>> full{{true, true, true, true, true}};
    Tensor pooled2 = masked_mean_pool(trunc, full);
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(pooled.data()[j] == doctest::Approx(pooled2.data()[j]).epsilon(1e-15));
}

TEST_CASE("masked max pool routes gradients to the argmax") {
    Rng rng(702);
    Tensor x = random_tensor({2, 5, 3}, rng);
    std::vector<std::vector<bool>> valid{{true, true, false, false, false},
                                         {true, true, true, true, true}};
    CHECK(max_grad_rel_error(
              [&] { return mean_all(mul(masked_max_pool(x, valid), masked_max_pool(x, valid))); },
              {x}) < kGradTol);
}

TEST_CASE("nll and focal bce gradients") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(800 + seed);
        Tensor logits = random_tensor({6, 9}, rng, 2.0);
        std::vector<int> labels;
        for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.index(9)));
        CHECK(max_grad_rel_error(
                  [&] { return nll_from_log_probs(log_softmax_lastdim(logits), labels); },
                  {logits}) < kGradTol);

        Tensor s = random_tensor({4, 12}, rng, 2.0);
        std::vector<double> r(48);
        for (double& v : r) v = rng.uniform() < 0.25 ? 1.0 : 0.0;
        CHECK(max_grad_rel_error([&] { return focal_bce_with_logits(s, r, 0.75, 2.0); }, {s}) <
              kGradTol);
        CHECK(max_grad_rel_error([&] { return focal_bce_with_logits(s, r, 0.5, 0.0); }, {s}) <
              kGradTol);
    }
}

TEST_CASE("dropout with a fixed seed is deterministic and scales correctly") {
    Rng rng(900);
    Tensor x = random_tensor({50, 20}, rng);
    Tensor d1 = dropout(x, 0.3, true, 77);
    Tensor d2 = dropout(x, 0.3, true, 77);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(d1.data()[i] == d2.data()[i]);
    // kept entries are scaled by 1/(1-p)
    std::size_t kept = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (d1.data()[i] != 0.0) {
            CHECK(d1.data()[i] == doctest::Approx(x.data()[i] / 0.7));
            ++kept;
        }
    }
    CHECK(kept > 500);
    CHECK(kept < 900);
    // eval mode is the identity
    Tensor e = dropout(x, 0.3, false, 77);
    CHECK(e.node() == x.node());
    // gradient through the fixed mask
    CHECK(max_grad_rel_error([&] { return mean_all(mul(dropout(x, 0.3, true, 5),
                                                       dropout(x, 0.3, true, 5))); },
                             {x}) < kGradTol);
}
