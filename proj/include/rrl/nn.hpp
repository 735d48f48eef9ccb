#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rrl/rng.hpp"
#include "rrl/runtime.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Convolution weights, stored (C_out, F, F, C_in) so the input-channel axis
/// is innermost like the activations it multiplies. The operation is
/// cross-correlation (no kernel flip). Bias is kept as a (1,1,1,C_out) tensor
/// so checkpoints treat every parameter uniformly.
template <typename T>
struct ConvParams {
  Tensor<T> kernels;
  Tensor<T> bias;
  std::int64_t stride = 1;

  std::int64_t out_channels() const { return kernels.batch(); }
  std::int64_t in_channels() const { return kernels.channels(); }
  std::int64_t window() const { return kernels.height(); }
};

template <typename T>
struct DenseParams {
  Tensor<T> weights;  // (1, 1, in, out)
  Tensor<T> bias;     // (1, 1, 1, out)

  std::int64_t in_features() const { return weights.width(); }
  std::int64_t out_features() const { return weights.channels(); }
};

/// Uniform init in +/- sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_fill(Tensor<T>& t, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
ConvParams<T> make_conv(std::int64_t f, std::int64_t c_in, std::int64_t c_out,
                        std::int64_t stride, Rng& rng) {
  ConvParams<T> p;
  p.kernels = Tensor<T>(c_out, f, f, c_in);
  p.bias = Tensor<T>(1, 1, 1, c_out);
  p.stride = stride;
  glorot_fill(p.kernels, f * f * c_in, f * f * c_out, rng);
  return p;
}

template <typename T>
DenseParams<T> make_dense(std::int64_t in, std::int64_t out, Rng& rng) {
  DenseParams<T> p;
  p.weights = Tensor<T>(1, 1, in, out);
  p.bias = Tensor<T>(1, 1, 1, out);
  glorot_fill(p.weights, in, out, rng);
  return p;
}

/// Cross-correlation with bias. Output (N, OH, OW, C_out) where
/// OH = (H - F)/stride + 1, required to divide exactly. The inner summation
/// order is fixed (f_h, then f_w, then c_in) so that identical windows produce
/// bit-identical dot products regardless of where they sit in the map.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, const ConvParams<T>& p) {
  const std::int64_t F = p.window(), S = p.stride;
  const std::int64_t N = x.batch(), H = x.height(), W = x.width(), C = x.channels();
  if (C != p.in_channels()) {
    throw std::invalid_argument("conv_forward: channel count mismatch");
  }
  if (H < F || W < F || (H - F) % S != 0 || (W - F) % S != 0) {
    throw std::invalid_argument("conv_forward: (in - F) must be divisible by stride");
  }
  const std::int64_t OH = (H - F) / S + 1, OW = (W - F) / S + 1;
  const std::int64_t CO = p.out_channels();
  Tensor<T> out(N, OH, OW, CO);
  parallel_for(N * OH, [&](std::int64_t job) {
    const std::int64_t n = job / OH, oh = job % OH;
    for (std::int64_t ow = 0; ow < OW; ++ow) {
      for (std::int64_t co = 0; co < CO; ++co) {
        T acc = T{0};
        for (std::int64_t fh = 0; fh < F; ++fh) {
          const T* xrow = &x(n, oh * S + fh, ow * S, 0);
          const T* krow = &p.kernels(co, fh, 0, 0);
          for (std::int64_t i = 0; i < F * C; ++i) acc += xrow[i] * krow[i];
        }
        out(n, oh, ow, co) = acc + p.bias(0, 0, 0, co);
      }
    }
  }, 4);
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_kernels;
  Tensor<T> grad_bias;
};

template <typename T>
ConvGrads<T> conv_backward(const Tensor<T>& x, const ConvParams<T>& p,
                           const Tensor<T>& grad_out) {
  const std::int64_t F = p.window(), S = p.stride;
  const std::int64_t N = x.batch(), C = x.channels();
  const std::int64_t OH = grad_out.height(), OW = grad_out.width(), CO = p.out_channels();
  if (grad_out.batch() != N || CO != grad_out.channels() ||
      OH != (x.height() - F) / S + 1 || OW != (x.width() - F) / S + 1) {
    throw std::invalid_argument("conv_backward: gradient shape mismatch");
  }
  ConvGrads<T> g;
  g.grad_x = Tensor<T>(N, x.height(), x.width(), C);
  g.grad_kernels = Tensor<T>(CO, F, F, C);
  g.grad_bias = Tensor<T>(1, 1, 1, CO);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < OH; ++oh) {
      for (std::int64_t ow = 0; ow < OW; ++ow) {
        for (std::int64_t co = 0; co < CO; ++co) {
          const T go = grad_out(n, oh, ow, co);
          g.grad_bias(0, 0, 0, co) += go;
          for (std::int64_t fh = 0; fh < F; ++fh) {
            const T* xrow = &x(n, oh * S + fh, ow * S, 0);
            T* gxrow = &g.grad_x(n, oh * S + fh, ow * S, 0);
            const T* krow = &p.kernels(co, fh, 0, 0);
            T* gkrow = &g.grad_kernels(co, fh, 0, 0);
            for (std::int64_t i = 0; i < F * C; ++i) {
              gxrow[i] += go * krow[i];
              gkrow[i] += go * xrow[i];
            }
          }
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> out = x;
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  if (!x.same_shape(grad_out)) throw std::invalid_argument("relu_backward: shape mismatch");
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.data().size(); ++i) {
    if (x.data()[i] <= T{0}) g.data()[i] = T{0};
  }
  return g;
}

namespace detail {
inline void check_pool_input(std::int64_t h, std::int64_t w) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("pool: H and W must be even for 2x2 stride-2 pooling");
  }
}
}  // namespace detail

/// 2x2 stride-2 max pooling. Argmax positions are recorded for the backward
/// pass (first maximum in scan order wins ties).
template <typename T>
std::pair<Tensor<T>, std::vector<std::uint8_t>> maxpool2_forward(const Tensor<T>& x) {
  detail::check_pool_input(x.height(), x.width());
  const std::int64_t N = x.batch(), H = x.height(), W = x.width(), C = x.channels();
  Tensor<T> out(N, H / 2, W / 2, C);
  std::vector<std::uint8_t> argmax(static_cast<std::size_t>(out.size()));
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < H / 2; ++oh) {
      for (std::int64_t ow = 0; ow < W / 2; ++ow) {
        for (std::int64_t c = 0; c < C; ++c) {
          T best = x(n, oh * 2, ow * 2, c);
          std::uint8_t pos = 0;
          for (std::uint8_t p = 1; p < 4; ++p) {
            const T v = x(n, oh * 2 + p / 2, ow * 2 + p % 2, c);
            if (v > best) {
              best = v;
              pos = p;
            }
          }
          out(n, oh, ow, c) = best;
          argmax[out.index(n, oh, ow, c)] = pos;
        }
      }
    }
  }
  return {std::move(out), std::move(argmax)};
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, const std::vector<std::uint8_t>& argmax,
                            std::int64_t in_h, std::int64_t in_w) {
  const std::int64_t N = grad_out.batch(), C = grad_out.channels();
  Tensor<T> g(N, in_h, in_w, C);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < grad_out.height(); ++oh) {
      for (std::int64_t ow = 0; ow < grad_out.width(); ++ow) {
        for (std::int64_t c = 0; c < C; ++c) {
          const std::uint8_t p = argmax[grad_out.index(n, oh, ow, c)];
          g(n, oh * 2 + p / 2, ow * 2 + p % 2, c) += grad_out(n, oh, ow, c);
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> avgpool2_forward(const Tensor<T>& x) {
  detail::check_pool_input(x.height(), x.width());
  const std::int64_t N = x.batch(), H = x.height(), W = x.width(), C = x.channels();
  Tensor<T> out(N, H / 2, W / 2, C);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < H / 2; ++oh) {
      for (std::int64_t ow = 0; ow < W / 2; ++ow) {
        for (std::int64_t c = 0; c < C; ++c) {
          out(n, oh, ow, c) = (x(n, oh * 2, ow * 2, c) + x(n, oh * 2, ow * 2 + 1, c) +
                               x(n, oh * 2 + 1, ow * 2, c) + x(n, oh * 2 + 1, ow * 2 + 1, c)) /
                              static_cast<T>(4);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> avgpool2_backward(const Tensor<T>& grad_out, std::int64_t in_h, std::int64_t in_w) {
  const std::int64_t N = grad_out.batch(), C = grad_out.channels();
  Tensor<T> g(N, in_h, in_w, C);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < grad_out.height(); ++oh) {
      for (std::int64_t ow = 0; ow < grad_out.width(); ++ow) {
        for (std::int64_t c = 0; c < C; ++c) {
          const T v = grad_out(n, oh, ow, c) / static_cast<T>(4);
          g(n, oh * 2, ow * 2, c) += v;
          g(n, oh * 2, ow * 2 + 1, c) += v;
          g(n, oh * 2 + 1, ow * 2, c) += v;
          g(n, oh * 2 + 1, ow * 2 + 1, c) += v;
        }
      }
    }
  }
  return g;
}

/// Fully connected layer on flattened activations (N, 1, 1, in) -> (N, 1, 1, out).
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const DenseParams<T>& p) {
  if (x.height() != 1 || x.width() != 1 || x.channels() != p.in_features()) {
    throw std::invalid_argument("dense_forward: expected flattened input matching weights");
  }
  const std::int64_t N = x.batch(), IN = p.in_features(), OUT = p.out_features();
  Tensor<T> out(N, 1, 1, OUT);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* xi = &x(n, 0, 0, 0);
    for (std::int64_t o = 0; o < OUT; ++o) {
      T acc = T{0};
      for (std::int64_t i = 0; i < IN; ++i) acc += xi[i] * p.weights(0, 0, i, o);
      out(n, 0, 0, o) = acc + p.bias(0, 0, 0, o);
    }
  }
  return out;
}

template <typename T>
struct DenseGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_weights;
  Tensor<T> grad_bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const DenseParams<T>& p,
                             const Tensor<T>& grad_out) {
  const std::int64_t N = x.batch(), IN = p.in_features(), OUT = p.out_features();
  if (grad_out.batch() != N || grad_out.channels() != OUT) {
    throw std::invalid_argument("dense_backward: gradient shape mismatch");
  }
  DenseGrads<T> g;
  g.grad_x = Tensor<T>(N, 1, 1, IN);
  g.grad_weights = Tensor<T>(1, 1, IN, OUT);
  g.grad_bias = Tensor<T>(1, 1, 1, OUT);
  for (std::int64_t n = 0; n < N; ++n) {
    const T* xi = &x(n, 0, 0, 0);
    const T* go = &grad_out(n, 0, 0, 0);
    for (std::int64_t o = 0; o < OUT; ++o) {
      g.grad_bias(0, 0, 0, o) += go[o];
      for (std::int64_t i = 0; i < IN; ++i) {
        g.grad_x(n, 0, 0, i) += go[o] * p.weights(0, 0, i, o);
        g.grad_weights(0, 0, i, o) += go[o] * xi[i];
      }
    }
  }
  return g;
}

/// Softmax over the channel axis, stabilized by max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> out = logits;
  const std::int64_t N = logits.batch(), K = logits.channels();
  for (std::int64_t n = 0; n < N; ++n) {
    T* row = &out(n, 0, 0, 0);
    T mx = row[0];
    for (std::int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    T sum = T{0};
    for (std::int64_t k = 0; k < K; ++k) {
      row[k] = std::exp(row[k] - mx);
      sum += row[k];
    }
    for (std::int64_t k = 0; k < K; ++k) row[k] /= sum;
  }
  return out;
}

/// Mean cross-entropy over the batch plus the gradient with respect to the
/// logits ((softmax - onehot) / N).
template <typename T>
std::pair<T, Tensor<T>> softmax_cross_entropy(const Tensor<T>& logits,
                                              const std::vector<int>& labels) {
  const std::int64_t N = logits.batch(), K = logits.channels();
  if (logits.height() != 1 || logits.width() != 1) {
    throw std::invalid_argument("softmax_cross_entropy: expected (N,1,1,K) logits");
  }
  if (static_cast<std::int64_t>(labels.size()) != N) {
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= K) throw std::invalid_argument("softmax_cross_entropy: label out of range");
  }
  Tensor<T> probs = softmax(logits);
  T loss = T{0};
  for (std::int64_t n = 0; n < N; ++n) {
    const T p = probs(n, 0, 0, labels[static_cast<std::size_t>(n)]);
    loss -= std::log(std::max(p, std::numeric_limits<T>::min()));
  }
  loss /= static_cast<T>(N);
  Tensor<T> grad = probs;
  for (std::int64_t n = 0; n < N; ++n) {
    grad(n, 0, 0, labels[static_cast<std::size_t>(n)]) -= T{1};
  }
  for (auto& v : grad.data()) v /= static_cast<T>(N);
  return {loss, std::move(grad)};
}

/// p <- p - lr * g, elementwise.
template <typename T>
void sgd_step(Tensor<T>& param, const Tensor<T>& grad, T lr) {
  if (!param.same_shape(grad)) throw std::invalid_argument("sgd_step: shape mismatch");
  if (!(lr > T{0})) throw std::invalid_argument("sgd_step: lr must be > 0");
  for (std::size_t i = 0; i < param.data().size(); ++i) param.data()[i] -= lr * grad.data()[i];
}

}  // namespace rrl
