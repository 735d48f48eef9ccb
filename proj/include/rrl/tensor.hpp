#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace rrl {

/// Dense 4-D array in (batch, height, width, channels) order, row-major with
/// channels innermost. The carrier for images, feature maps and kernels.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor holds float or double");

 public:
  Tensor() = default;

  Tensor(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c)
      : n_(n), h_(h), w_(w), c_(c) {
    if (n < 1 || h < 1 || w < 1 || c < 1) {
      throw std::invalid_argument("Tensor: all dimensions must be >= 1, got (" +
                                  std::to_string(n) + "," + std::to_string(h) + "," +
                                  std::to_string(w) + "," + std::to_string(c) + ")");
    }
    data_.assign(static_cast<std::size_t>(n * h * w * c), T{0});
  }

  static Tensor full(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c, T value) {
    Tensor t(n, h, w, c);
    t.data_.assign(t.data_.size(), value);
    return t;
  }

  std::int64_t batch() const { return n_; }
  std::int64_t height() const { return h_; }
  std::int64_t width() const { return w_; }
  std::int64_t channels() const { return c_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

  std::size_t index(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
    assert(n >= 0 && n < n_ && h >= 0 && h < h_ && w >= 0 && w < w_ && c >= 0 && c < c_);
    return static_cast<std::size_t>(((n * h_ + h) * w_ + w) * c_ + c);
  }

  /// Checked element access; out-of-range indices throw.
  T& at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
    check_index(n, h, w, c);
    return data_[index(n, h, w, c)];
  }
  const T& at(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
    check_index(n, h, w, c);
    return data_[index(n, h, w, c)];
  }

  /// Unchecked access for inner loops whose bounds were validated up front.
  T& operator()(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) {
    return data_[index(n, h, w, c)];
  }
  const T& operator()(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
    return data_[index(n, h, w, c)];
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Tensor& o) const { return same_shape(o) && data_ == o.data_; }

 private:
  void check_index(std::int64_t n, std::int64_t h, std::int64_t w, std::int64_t c) const {
    if (n < 0 || n >= n_ || h < 0 || h >= h_ || w < 0 || w >= w_ || c < 0 || c >= c_) {
      throw std::out_of_range("Tensor: index (" + std::to_string(n) + "," + std::to_string(h) +
                              "," + std::to_string(w) + "," + std::to_string(c) +
                              ") outside shape (" + std::to_string(n_) + "," +
                              std::to_string(h_) + "," + std::to_string(w_) + "," +
                              std::to_string(c_) + ")");
    }
  }

  std::int64_t n_ = 0, h_ = 0, w_ = 0, c_ = 0;
  std::vector<T> data_;
};

/// Counterclockwise quarter-turn rotation in the (height, width) plane, applied
/// per batch sample and channel. n is reduced mod 4; odd n swaps H and W.
/// Pure permutation of elements, no arithmetic.
template <typename T>
Tensor<T> rot90(const Tensor<T>& t, std::int64_t n) {
  const std::int64_t k = ((n % 4) + 4) % 4;
  if (k == 0) return t;
  const std::int64_t N = t.batch(), H = t.height(), W = t.width(), C = t.channels();
  const std::int64_t oh = (k % 2 == 0) ? H : W;
  const std::int64_t ow = (k % 2 == 0) ? W : H;
  Tensor<T> out(N, oh, ow, C);
  for (std::int64_t b = 0; b < N; ++b) {
    for (std::int64_t h = 0; h < oh; ++h) {
      for (std::int64_t w = 0; w < ow; ++w) {
        std::int64_t sh = 0, sw = 0;
        switch (k) {
          case 1: sh = w; sw = W - 1 - h; break;
          case 2: sh = H - 1 - h; sw = W - 1 - w; break;
          default: sh = H - 1 - w; sw = h; break;  // k == 3
        }
        for (std::int64_t c = 0; c < C; ++c) out(b, h, w, c) = t(b, sh, sw, c);
      }
    }
  }
  return out;
}

/// Rotates counterclockwise about the image center ((H-1)/2, (W-1)/2) by an
/// arbitrary angle with bilinear interpolation; sample points outside the
/// source take `fill`. Angles that are exact multiples of 90 degrees are
/// delegated to rot90 so lattice-preserving rotations stay interpolation-free.
template <typename T>
Tensor<T> rotate_bilinear(const Tensor<T>& t, double theta_degrees, T fill) {
  if (t.height() != t.width()) {
    throw std::invalid_argument("rotate_bilinear: input must be square in H,W");
  }
  const double quarter = theta_degrees / 90.0;
  const double nearest = std::round(quarter);
  if (std::abs(quarter - nearest) < 1e-9) {
    return rot90(t, static_cast<std::int64_t>(nearest));
  }
  const std::int64_t N = t.batch(), H = t.height(), W = t.width(), C = t.channels();
  const double rad = theta_degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = static_cast<double>(H - 1) / 2.0;
  const double cx = static_cast<double>(W - 1) / 2.0;
  Tensor<T> out(N, H, W, C);
  for (std::int64_t b = 0; b < N; ++b) {
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t w = 0; w < W; ++w) {
        // Inverse map: rotate the output coordinate by -theta. With y pointing
        // down, a visually counterclockwise turn is (x,y) -> (xc+ys, -xs+yc).
        const double xo = static_cast<double>(w) - cx;
        const double yo = static_cast<double>(h) - cy;
        const double xs = cs * xo - sn * yo + cx;
        const double ys = sn * xo + cs * yo + cy;
        const std::int64_t x0 = static_cast<std::int64_t>(std::floor(xs));
        const std::int64_t y0 = static_cast<std::int64_t>(std::floor(ys));
        const double fx = xs - static_cast<double>(x0);
        const double fy = ys - static_cast<double>(y0);
        for (std::int64_t c = 0; c < C; ++c) {
          auto sample = [&](std::int64_t yy, std::int64_t xx) -> double {
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) return static_cast<double>(fill);
            return static_cast<double>(t(b, yy, xx, c));
          };
          const double v00 = sample(y0, x0), v01 = sample(y0, x0 + 1);
          const double v10 = sample(y0 + 1, x0), v11 = sample(y0 + 1, x0 + 1);
          const double top = v00 + (v01 - v00) * fx;
          const double bot = v10 + (v11 - v10) * fx;
          out(b, h, w, c) = static_cast<T>(top + (bot - top) * fy);
        }
      }
    }
  }
  return out;
}

/// Sliding-window geometry over a (height, width) plane. Construction fails
/// unless the window count comes out exact: (in + 2*padding - window) must be
/// divisible by the stride on both axes.
struct WindowGrid {
  std::int64_t window = 0;   // F, window side length
  std::int64_t stride = 0;
  std::int64_t padding = 0;  // zero-filled border, same on all sides
  std::int64_t in_h = 0, in_w = 0;
  std::int64_t out_h = 0, out_w = 0;  // window counts per axis

  WindowGrid() = default;

  WindowGrid(std::int64_t in_h_, std::int64_t in_w_, std::int64_t window_,
             std::int64_t stride_ = 1, std::int64_t padding_ = 0)
      : window(window_), stride(stride_), padding(padding_), in_h(in_h_), in_w(in_w_) {
    if (window < 1 || stride < 1 || padding < 0 || in_h < 1 || in_w < 1) {
      throw std::invalid_argument("WindowGrid: window/stride must be >= 1, padding >= 0");
    }
    const std::int64_t span_h = in_h + 2 * padding - window;
    const std::int64_t span_w = in_w + 2 * padding - window;
    if (span_h < 0 || span_w < 0) {
      throw std::invalid_argument("WindowGrid: window larger than padded input");
    }
    if (span_h % stride != 0 || span_w % stride != 0) {
      throw std::invalid_argument("WindowGrid: (in + 2*padding - window) not divisible by stride");
    }
    out_h = span_h / stride + 1;
    out_w = span_w / stride + 1;
  }

  std::int64_t window_count() const { return out_h * out_w; }

  bool operator==(const WindowGrid&) const = default;
};

namespace detail {
inline void check_grid(const WindowGrid& grid, std::int64_t h, std::int64_t w,
                       const char* who) {
  if (grid.in_h != h || grid.in_w != w) {
    throw std::invalid_argument(std::string(who) + ": grid built for " +
                                std::to_string(grid.in_h) + "x" + std::to_string(grid.in_w) +
                                " but tensor is " + std::to_string(h) + "x" +
                                std::to_string(w));
  }
}
}  // namespace detail

/// Copies every sliding window into a window stack of shape
/// (N*out_h*out_w, F, F, C); window (n, oh, ow) lands at batch slot
/// (n*out_h + oh)*out_w + ow. Pixels drawn from the padded border are zero.
/// Overlapping windows duplicate their shared source pixels.
template <typename T>
Tensor<T> extract_windows(const Tensor<T>& t, const WindowGrid& grid) {
  detail::check_grid(grid, t.height(), t.width(), "extract_windows");
  const std::int64_t N = t.batch(), H = t.height(), W = t.width(), C = t.channels();
  const std::int64_t F = grid.window;
  Tensor<T> out(N * grid.window_count(), F, F, C);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < grid.out_h; ++oh) {
      for (std::int64_t ow = 0; ow < grid.out_w; ++ow) {
        const std::int64_t slot = (n * grid.out_h + oh) * grid.out_w + ow;
        for (std::int64_t fh = 0; fh < F; ++fh) {
          const std::int64_t sh = oh * grid.stride - grid.padding + fh;
          for (std::int64_t fw = 0; fw < F; ++fw) {
            const std::int64_t sw = ow * grid.stride - grid.padding + fw;
            if (sh < 0 || sh >= H || sw < 0 || sw >= W) continue;  // stays zero
            for (std::int64_t c = 0; c < C; ++c) out(slot, fh, fw, c) = t(n, sh, sw, c);
          }
        }
      }
    }
  }
  return out;
}

/// Tiles a window stack into a dense (N, F*out_h, F*out_w, C) map; tile
/// (oh, ow) occupies rows [oh*F, (oh+1)*F) and columns [ow*F, (ow+1)*F).
/// Inverse of a stride-F, padding-0 re-extraction.
template <typename T>
Tensor<T> assemble_windows(const Tensor<T>& windows, const WindowGrid& grid) {
  const std::int64_t F = grid.window;
  if (windows.height() != F || windows.width() != F) {
    throw std::invalid_argument("assemble_windows: window tensor is not F x F");
  }
  if (windows.batch() % grid.window_count() != 0) {
    throw std::invalid_argument("assemble_windows: window count does not match grid");
  }
  const std::int64_t N = windows.batch() / grid.window_count();
  const std::int64_t C = windows.channels();
  Tensor<T> out(N, F * grid.out_h, F * grid.out_w, C);
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t oh = 0; oh < grid.out_h; ++oh) {
      for (std::int64_t ow = 0; ow < grid.out_w; ++ow) {
        const std::int64_t slot = (n * grid.out_h + oh) * grid.out_w + ow;
        for (std::int64_t fh = 0; fh < F; ++fh) {
          for (std::int64_t fw = 0; fw < F; ++fw) {
            for (std::int64_t c = 0; c < C; ++c) {
              out(n, oh * F + fh, ow * F + fw, c) = windows(slot, fh, fw, c);
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace rrl
