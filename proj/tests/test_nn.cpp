#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "rrl/nn.hpp"
#include "rrl/rng.hpp"
#include "rrl/tensor.hpp"

using rrl::ConvParams;
using rrl::DenseParams;
using rrl::Rng;
using rrl::Tensor;

namespace {

Tensor<double> random_tensor(Rng& rng, std::int64_t n, std::int64_t h, std::int64_t w,
                             std::int64_t c) {
  Tensor<double> t(n, h, w, c);
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// Straight-from-the-definition cross-correlation with the same accumulation
// order as the library (rows outer, then the fw/c cells, bias last).
Tensor<double> conv_oracle(const Tensor<double>& x, const ConvParams<double>& p) {
  const std::int64_t f = p.window(), s = p.stride;
  const std::int64_t oh_n = (x.height() - f) / s + 1, ow_n = (x.width() - f) / s + 1;
  Tensor<double> out(x.batch(), oh_n, ow_n, p.out_channels());
  for (std::int64_t n = 0; n < x.batch(); ++n) {
    for (std::int64_t oh = 0; oh < oh_n; ++oh) {
      for (std::int64_t ow = 0; ow < ow_n; ++ow) {
        for (std::int64_t co = 0; co < p.out_channels(); ++co) {
          double acc = 0;
          for (std::int64_t fh = 0; fh < f; ++fh) {
            for (std::int64_t fw = 0; fw < f; ++fw) {
              for (std::int64_t c = 0; c < x.channels(); ++c) {
                acc += x(n, oh * s + fh, ow * s + fw, c) * p.kernels(co, fh, fw, c);
              }
            }
          }
          out(n, oh, ow, co) = acc + p.bias(0, 0, 0, co);
        }
      }
    }
  }
  return out;
}

double weighted_sum(const Tensor<double>& t, const Tensor<double>& w) {
  double acc = 0;
  for (std::size_t i = 0; i < t.data().size(); ++i) acc += t.data()[i] * w.data()[i];
  return acc;
}

}  // namespace

TEST_CASE("conv_forward matches the definition") {
  Rng rng(41);
  struct Case {
    std::int64_t h, f, s, c_in, c_out;
  };
  for (const auto& cs : std::vector<Case>{{6, 3, 1, 3, 4}, {6, 3, 3, 2, 1}, {10, 5, 5, 1, 6}}) {
    const Tensor<double> x = random_tensor(rng, 2, cs.h, cs.h, cs.c_in);
    const auto p = rrl::make_conv<double>(cs.f, cs.c_in, cs.c_out, cs.s, rng);
    REQUIRE(conv_forward(x, p) == conv_oracle(x, p));
  }
}

TEST_CASE("conv of a window with itself sums the squares") {
  Rng rng(42);
  const Tensor<double> x = random_tensor(rng, 1, 3, 3, 2);
  ConvParams<double> p;
  p.kernels = Tensor<double>(1, 3, 3, 2);
  p.kernels.data() = x.data();
  p.bias = Tensor<double>(1, 1, 1, 1);
  p.bias(0, 0, 0, 0) = 0.25;
  p.stride = 3;
  double squares = 0;
  for (const double v : x.data()) squares += v * v;
  const Tensor<double> out = conv_forward(x, p);
  REQUIRE(out.batch() == 1);
  REQUIRE(out.height() == 1);
  REQUIRE(out(0, 0, 0, 0) == Catch::Approx(squares + 0.25).epsilon(1e-14));
}

TEST_CASE("conv_forward validates shapes") {
  Rng rng(43);
  const auto p = rrl::make_conv<double>(3, 2, 4, 2, rng);
  REQUIRE_THROWS_AS(conv_forward(random_tensor(rng, 1, 6, 6, 3), p), std::invalid_argument);
  REQUIRE_THROWS_AS(conv_forward(random_tensor(rng, 1, 6, 6, 2), p), std::invalid_argument);
  REQUIRE_NOTHROW(conv_forward(random_tensor(rng, 1, 7, 7, 2), p));
  REQUIRE_THROWS_AS(conv_forward(random_tensor(rng, 1, 2, 2, 2), p), std::invalid_argument);
}

TEST_CASE("conv_backward matches central differences") {
  Rng rng(44);
  Tensor<double> x = random_tensor(rng, 1, 5, 5, 2);
  auto p = rrl::make_conv<double>(3, 2, 2, 2, rng);
  const Tensor<double> weights = random_tensor(rng, 1, 2, 2, 2);

  const auto loss = [&]() { return weighted_sum(conv_forward(x, p), weights); };
  const auto grads = conv_backward(x, p, weights);
  const double h = 1e-5;

  const auto check = [&](Tensor<double>& param, const Tensor<double>& grad) {
    for (std::size_t i = 0; i < param.data().size(); ++i) {
      const double keep = param.data()[i];
      param.data()[i] = keep + h;
      const double up = loss();
      param.data()[i] = keep - h;
      const double down = loss();
      param.data()[i] = keep;
      REQUIRE(grad.data()[i] == Catch::Approx((up - down) / (2 * h)).epsilon(1e-6).margin(1e-8));
    }
  };
  check(x, grads.grad_x);
  check(p.kernels, grads.grad_kernels);
  check(p.bias, grads.grad_bias);

  Tensor<double> bad(1, 2, 2, 3);
  REQUIRE_THROWS_AS(conv_backward(x, p, bad), std::invalid_argument);
}

TEST_CASE("relu clamps activations and gates gradients") {
  Tensor<double> x(1, 1, 2, 3);
  x.data() = {-1.5, 0.0, 2.0, -0.0, 3.5, -0.25};
  const Tensor<double> y = relu_forward(x);
  REQUIRE(y.data() == std::vector<double>{0.0, 0.0, 2.0, 0.0, 3.5, 0.0});

  Tensor<double> g(1, 1, 2, 3);
  g.data() = {1, 2, 3, 4, 5, 6};
  const Tensor<double> gx = relu_backward(x, g);
  // Gradient passes only where the input was strictly positive; exact zeros
  // (the kink) block it.
  REQUIRE(gx.data() == std::vector<double>{0, 0, 3, 0, 5, 0});
  Tensor<double> wrong(1, 1, 3, 2);
  REQUIRE_THROWS_AS(relu_backward(x, wrong), std::invalid_argument);
}

TEST_CASE("maxpool picks block maxima and ties go to the first cell") {
  Tensor<double> x(1, 4, 4, 1);
  // Blocks (row-major): {1,2,3,4} max 4; {5,5,5,5} tie -> first; {9,-1,0,2}
  // max 9 at top-left; {0,7,7,0} tie between top-right and bottom-left.
  x.data() = {1, 2, 5, 5, 3, 4, 5, 5, 9, -1, 0, 7, 0, 2, 7, 0};
  const auto [out, argmax] = rrl::maxpool2_forward(x);
  REQUIRE(out.data() == std::vector<double>{4, 5, 9, 7});
  REQUIRE(argmax == std::vector<std::uint8_t>{3, 0, 0, 1});

  Tensor<double> g(1, 2, 2, 1);
  g.data() = {10, 20, 30, 40};
  const Tensor<double> gx = rrl::maxpool2_backward(g, argmax, 4, 4);
  Tensor<double> want(1, 4, 4, 1);
  want(0, 1, 1, 0) = 10;  // pos 3 of block (0,0)
  want(0, 0, 2, 0) = 20;  // pos 0 of block (0,1)
  want(0, 2, 0, 0) = 30;  // pos 0 of block (1,0)
  want(0, 2, 3, 0) = 40;  // pos 1 of block (1,1)
  REQUIRE(gx == want);

  Tensor<double> odd(1, 3, 4, 1);
  REQUIRE_THROWS_AS(rrl::maxpool2_forward(odd), std::invalid_argument);
}

TEST_CASE("avgpool averages blocks and spreads gradient evenly") {
  Tensor<double> x(1, 2, 2, 2);
  x.data() = {1, 10, 2, 20, 3, 30, 6, 40};
  const Tensor<double> out = rrl::avgpool2_forward(x);
  REQUIRE(out.data() == std::vector<double>{3.0, 25.0});

  Tensor<double> g(1, 1, 1, 2);
  g.data() = {8, 4};
  const Tensor<double> gx = rrl::avgpool2_backward(g, 2, 2);
  REQUIRE(gx.data() == std::vector<double>{2, 1, 2, 1, 2, 1, 2, 1});
}

TEST_CASE("dense_forward is a plain affine map") {
  Rng rng(45);
  DenseParams<double> p;
  p.weights = Tensor<double>(1, 1, 3, 2);
  p.weights.data() = {1, 10, 2, 20, 3, 30};  // (in, out) row-major
  p.bias = Tensor<double>(1, 1, 1, 2);
  p.bias.data() = {0.5, -0.5};
  Tensor<double> x(2, 1, 1, 3);
  x.data() = {1, 2, 3, -1, 0, 1};
  const Tensor<double> y = dense_forward(x, p);
  REQUIRE(y.batch() == 2);
  REQUIRE(y.channels() == 2);
  REQUIRE(y(0, 0, 0, 0) == Catch::Approx(1 * 1 + 2 * 2 + 3 * 3 + 0.5));
  REQUIRE(y(0, 0, 0, 1) == Catch::Approx(10 + 40 + 90 - 0.5));
  REQUIRE(y(1, 0, 0, 0) == Catch::Approx(-1 + 0 + 3 + 0.5));
  REQUIRE(y(1, 0, 0, 1) == Catch::Approx(-10 + 0 + 30 - 0.5));

  REQUIRE_THROWS_AS(dense_forward(random_tensor(rng, 1, 1, 1, 4), p), std::invalid_argument);
  REQUIRE_THROWS_AS(dense_forward(random_tensor(rng, 1, 2, 2, 3), p), std::invalid_argument);
}

TEST_CASE("dense_backward matches central differences") {
  Rng rng(46);
  Tensor<double> x = random_tensor(rng, 2, 1, 1, 4);
  auto p = rrl::make_dense<double>(4, 3, rng);
  const Tensor<double> weights = random_tensor(rng, 2, 1, 1, 3);

  const auto loss = [&]() { return weighted_sum(dense_forward(x, p), weights); };
  const auto grads = dense_backward(x, p, weights);
  const double h = 1e-5;
  const auto check = [&](Tensor<double>& param, const Tensor<double>& grad) {
    for (std::size_t i = 0; i < param.data().size(); ++i) {
      const double keep = param.data()[i];
      param.data()[i] = keep + h;
      const double up = loss();
      param.data()[i] = keep - h;
      const double down = loss();
      param.data()[i] = keep;
      REQUIRE(grad.data()[i] == Catch::Approx((up - down) / (2 * h)).epsilon(1e-6).margin(1e-8));
    }
  };
  check(x, grads.grad_x);
  check(p.weights, grads.grad_weights);
  check(p.bias, grads.grad_bias);
}

TEST_CASE("softmax normalizes and is stable under large shifts") {
  Tensor<double> logits(1, 1, 1, 4);
  logits.data() = {0.0, 0.0, 0.0, 0.0};
  const Tensor<double> uniform = rrl::softmax(logits);
  for (const double v : uniform.data()) REQUIRE(v == Catch::Approx(0.25).epsilon(1e-14));

  Tensor<double> skewed(2, 1, 1, 3);
  skewed.data() = {1.0, 2.0, 3.0, -1.0, 0.0, 1.0};
  const Tensor<double> probs = rrl::softmax(skewed);
  for (std::int64_t n = 0; n < 2; ++n) {
    double sum = 0;
    for (std::int64_t k = 0; k < 3; ++k) sum += probs(n, 0, 0, k);
    REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-14));
  }
  // Rows differ only by a constant shift, so the probabilities agree.
  for (std::int64_t k = 0; k < 3; ++k) {
    REQUIRE(probs(0, 0, 0, k) == Catch::Approx(probs(1, 0, 0, k)).epsilon(1e-14));
  }

  Tensor<double> huge = skewed;
  for (auto& v : huge.data()) v += 1000.0;
  const Tensor<double> shifted = rrl::softmax(huge);
  for (std::size_t i = 0; i < shifted.data().size(); ++i) {
    REQUIRE(shifted.data()[i] == Catch::Approx(probs.data()[i]).epsilon(1e-12));
    REQUIRE(std::isfinite(shifted.data()[i]));
  }
}

TEST_CASE("softmax cross entropy loss and gradient") {
  Tensor<double> logits(2, 1, 1, 4);
  logits.data() = {0, 0, 0, 0, 1, 2, 3, 4};
  const std::vector<int> labels = {2, 0};
  const auto [loss, grad] = rrl::softmax_cross_entropy(logits, labels);

  // First sample is uniform: its contribution is ln 4 exactly.
  const Tensor<double> probs = rrl::softmax(logits);
  const double want_loss =
      0.5 * (-std::log(probs(0, 0, 0, 2)) - std::log(probs(1, 0, 0, 0)));
  REQUIRE(loss == Catch::Approx(want_loss).epsilon(1e-12));
  REQUIRE(-std::log(probs(0, 0, 0, 2)) == Catch::Approx(std::log(4.0)).epsilon(1e-12));

  for (std::int64_t n = 0; n < 2; ++n) {
    for (std::int64_t k = 0; k < 4; ++k) {
      const double onehot = (labels[static_cast<std::size_t>(n)] == k) ? 1.0 : 0.0;
      REQUIRE(grad(n, 0, 0, k) ==
              Catch::Approx((probs(n, 0, 0, k) - onehot) / 2.0).epsilon(1e-12).margin(1e-15));
    }
  }

  // The gradient of the mean loss over each row sums to zero.
  for (std::int64_t n = 0; n < 2; ++n) {
    double sum = 0;
    for (std::int64_t k = 0; k < 4; ++k) sum += grad(n, 0, 0, k);
    REQUIRE(sum == Catch::Approx(0.0).margin(1e-12));
  }

  REQUIRE_THROWS_AS(rrl::softmax_cross_entropy(logits, std::vector<int>{2}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(rrl::softmax_cross_entropy(logits, std::vector<int>{2, 4}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(rrl::softmax_cross_entropy(logits, std::vector<int>{2, -1}),
                    std::invalid_argument);
}

TEST_CASE("softmax cross entropy matches central differences") {
  Rng rng(47);
  Tensor<double> logits = random_tensor(rng, 3, 1, 1, 5);
  const std::vector<int> labels = {4, 0, 2};
  const auto grad = rrl::softmax_cross_entropy(logits, labels).second;
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.data().size(); ++i) {
    const double keep = logits.data()[i];
    logits.data()[i] = keep + h;
    const double up = rrl::softmax_cross_entropy(logits, labels).first;
    logits.data()[i] = keep - h;
    const double down = rrl::softmax_cross_entropy(logits, labels).first;
    logits.data()[i] = keep;
    REQUIRE(grad.data()[i] == Catch::Approx((up - down) / (2 * h)).epsilon(1e-5).margin(1e-9));
  }
}

TEST_CASE("sgd_step walks a quadratic toward its minimum") {
  Tensor<double> p(1, 1, 1, 1);
  p(0, 0, 0, 0) = 1.0;
  Tensor<double> g(1, 1, 1, 1);
  for (int step = 0; step < 2; ++step) {
    g(0, 0, 0, 0) = 2.0 * p(0, 0, 0, 0);  // d/dp of p^2
    rrl::sgd_step(p, g, 0.25);
  }
  REQUIRE(p(0, 0, 0, 0) == Catch::Approx(0.25));

  Tensor<double> wrong(1, 1, 1, 2);
  REQUIRE_THROWS_AS(rrl::sgd_step(p, wrong, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(rrl::sgd_step(p, g, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(rrl::sgd_step(p, g, -1.0), std::invalid_argument);
}

TEST_CASE("glorot initialization respects its bound and fills every value") {
  Rng rng(48);
  Tensor<double> t(8, 3, 3, 4);
  rrl::glorot_fill(t, 36, 72, rng);
  const double limit = std::sqrt(6.0 / (36.0 + 72.0));
  double max_abs = 0;
  for (const double v : t.data()) {
    REQUIRE(std::abs(v) <= limit);
    max_abs = std::max(max_abs, std::abs(v));
  }
  REQUIRE(max_abs > 0.5 * limit);  // values actually spread out

  const auto conv = rrl::make_conv<double>(5, 3, 8, 1, rng);
  REQUIRE(conv.kernels.batch() == 8);
  REQUIRE(conv.kernels.height() == 5);
  REQUIRE(conv.kernels.channels() == 3);
  REQUIRE(conv.bias.channels() == 8);
  for (const double v : conv.bias.data()) REQUIRE(v == 0.0);

  const auto dense = rrl::make_dense<double>(7, 3, rng);
  REQUIRE(dense.weights.width() == 7);
  REQUIRE(dense.weights.channels() == 3);
  for (const double v : dense.bias.data()) REQUIRE(v == 0.0);
}
