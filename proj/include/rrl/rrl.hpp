#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rrl/lbp.hpp"
#include "rrl/runtime.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Rotation choices made by one forward pass through a regional rotation
/// layer; immutable bookkeeping that lets the backward pass invert the
/// per-window permutations and lets tests inspect chosen orientations.
struct RotationRecord {
  WindowGrid grid;
  LbpMode mode = LbpMode::kQuarter4;
  ChannelPolicy policy = ChannelPolicy::kIndependent;
  std::int64_t batch = 0;
  std::int64_t channels = 0;
  // One entry per (window, channel) for Independent, per window for Shared;
  // window (n, oh, ow) is slot (n*out_h + oh)*out_w + ow.
  std::vector<std::uint8_t> rotation;

  std::int64_t per_window() const {
    return policy == ChannelPolicy::kIndependent ? channels : 1;
  }
};

struct RrlOutput;  // forward declaration for doc tools only

namespace detail {

template <typename T>
inline void gather_window(const Tensor<T>& x, const WindowGrid& g, std::int64_t n,
                          std::int64_t oh, std::int64_t ow, T* buf) {
  const std::int64_t F = g.window, C = x.channels();
  const std::int64_t H = x.height(), W = x.width();
  for (std::int64_t fh = 0; fh < F; ++fh) {
    const std::int64_t sh = oh * g.stride - g.padding + fh;
    for (std::int64_t fw = 0; fw < F; ++fw) {
      const std::int64_t sw = ow * g.stride - g.padding + fw;
      T* cell = buf + (fh * F + fw) * C;
      if (sh < 0 || sh >= H || sw < 0 || sw >= W) {
        for (std::int64_t c = 0; c < C; ++c) cell[c] = T{0};
      } else {
        const T* s = &x(n, sh, sw, 0);
        for (std::int64_t c = 0; c < C; ++c) cell[c] = s[c];
      }
    }
  }
}

template <typename T>
inline void canonicalize_window_into(const T* win, std::int64_t f, std::int64_t c,
                                     LbpMode mode, ChannelPolicy policy, T* out,
                                     std::uint8_t* rotation_out,
                                     CanonScratch<T>& scratch, std::vector<T>& plane,
                                     std::vector<T>& rotated) {
  if (policy == ChannelPolicy::kShared) {
    scratch.deciding.resize(static_cast<std::size_t>(f * f));
    if (c == 1) {
      std::copy(win, win + f * f, scratch.deciding.data());
    } else {
      for (std::int64_t i = 0; i < f * f; ++i) {
        T acc = T{0};
        for (std::int64_t ch = 0; ch < c; ++ch) acc += win[i * c + ch];
        scratch.deciding[static_cast<std::size_t>(i)] = acc / static_cast<T>(c);
      }
    }
    const int k = select_canonical_rotation(scratch.deciding.data(), win, f, c, mode,
                                            scratch);
    apply_candidate_rotation(mode, k, win, out, f, c);
    rotation_out[0] = static_cast<std::uint8_t>(k);
    return;
  }
  plane.resize(static_cast<std::size_t>(f * f));
  rotated.resize(static_cast<std::size_t>(f * f));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < f * f; ++i) plane[static_cast<std::size_t>(i)] = win[i * c + ch];
    const int k = select_canonical_rotation(plane.data(), plane.data(), f, 1, mode,
                                            scratch);
    rotation_out[ch] = static_cast<std::uint8_t>(k);
    apply_candidate_rotation(mode, k, plane.data(), rotated.data(), f, 1);
    for (std::int64_t i = 0; i < f * f; ++i) out[i * c + ch] = rotated[static_cast<std::size_t>(i)];
  }
}

/// Writes an f x f x c block into the tiled map at tile (oh, ow).
template <typename T>
inline void scatter_tile(Tensor<T>& tiled, std::int64_t n, std::int64_t oh,
                         std::int64_t ow, const T* block, std::int64_t f) {
  const std::int64_t C = tiled.channels();
  for (std::int64_t fh = 0; fh < f; ++fh) {
    T* row = &tiled(n, oh * f + fh, ow * f, 0);
    const T* src = block + fh * f * C;
    for (std::int64_t i = 0; i < f * C; ++i) row[i] = src[i];
  }
}

template <typename T>
inline void gather_tile(const Tensor<T>& tiled, std::int64_t n, std::int64_t oh,
                        std::int64_t ow, T* block, std::int64_t f) {
  const std::int64_t C = tiled.channels();
  for (std::int64_t fh = 0; fh < f; ++fh) {
    const T* row = &tiled(n, oh * f + fh, ow * f, 0);
    T* dst = block + fh * f * C;
    for (std::int64_t i = 0; i < f * C; ++i) dst[i] = row[i];
  }
}

inline void check_rrl_input(const WindowGrid& grid, std::int64_t h, std::int64_t w,
                            LbpMode mode) {
  if (h != w) {
    throw std::invalid_argument("rrl: input must be square in H,W");
  }
  check_grid(grid, h, w, "rrl");
  check_mode_legal(mode, grid.window);
  // A square input with symmetric padding and uniform stride makes the set of
  // window centers map to itself under quarter turns; the grid constructor
  // already enforced exact division, so nothing further to check here.
}

}  // namespace detail

/// Canonicalizes every sliding window of x and tiles the results into a dense
/// (N, F*out_h, F*out_w, C) map ready for a stride-F convolution. Each tile is
/// a pure permutation of its source window: no arithmetic touches the values.
template <typename T>
std::pair<Tensor<T>, RotationRecord> rrl_forward(const Tensor<T>& x, const WindowGrid& grid,
                                                 LbpMode mode, ChannelPolicy policy) {
  detail::check_rrl_input(grid, x.height(), x.width(), mode);
  const std::int64_t N = x.batch(), C = x.channels(), F = grid.window;
  RotationRecord record;
  record.grid = grid;
  record.mode = mode;
  record.policy = policy;
  record.batch = N;
  record.channels = C;
  record.rotation.assign(static_cast<std::size_t>(N * grid.window_count() * record.per_window()),
                         0);
  Tensor<T> tiled(N, F * grid.out_h, F * grid.out_w, C);

  const std::int64_t total = N * grid.window_count();
  parallel_for(total, [&](std::int64_t slot) {
    thread_local detail::CanonScratch<T> scratch;
    thread_local std::vector<T> win, canon, plane, rotated;
    win.resize(static_cast<std::size_t>(F * F * C));
    canon.resize(static_cast<std::size_t>(F * F * C));
    const std::int64_t n = slot / grid.window_count();
    const std::int64_t rem = slot % grid.window_count();
    const std::int64_t oh = rem / grid.out_w;
    const std::int64_t ow = rem % grid.out_w;
    detail::gather_window(x, grid, n, oh, ow, win.data());
    detail::canonicalize_window_into(win.data(), F, C, mode, policy, canon.data(),
                                     record.rotation.data() + slot * record.per_window(),
                                     scratch, plane, rotated);
    detail::scatter_tile(tiled, n, oh, ow, canon.data(), F);
  });
  return {std::move(tiled), std::move(record)};
}

/// Replays a recorded forward pass on a new input: same windows, same
/// rotations, no selection. With a frozen record the layer is a linear map
/// (a permutation with duplication for overlapping windows).
template <typename T>
Tensor<T> rrl_apply(const Tensor<T>& x, const RotationRecord& record) {
  const WindowGrid& grid = record.grid;
  detail::check_grid(grid, x.height(), x.width(), "rrl_apply");
  if (x.batch() != record.batch || x.channels() != record.channels) {
    throw std::invalid_argument("rrl_apply: tensor shape does not match record");
  }
  const std::int64_t N = x.batch(), C = x.channels(), F = grid.window;
  Tensor<T> tiled(N, F * grid.out_h, F * grid.out_w, C);
  std::vector<T> win(static_cast<std::size_t>(F * F * C));
  std::vector<T> rot(static_cast<std::size_t>(F * F * C));
  std::vector<T> plane(static_cast<std::size_t>(F * F));
  std::vector<T> plane_rot(static_cast<std::size_t>(F * F));
  for (std::int64_t slot = 0; slot < N * grid.window_count(); ++slot) {
    const std::int64_t n = slot / grid.window_count();
    const std::int64_t rem = slot % grid.window_count();
    const std::int64_t oh = rem / grid.out_w;
    const std::int64_t ow = rem % grid.out_w;
    detail::gather_window(x, grid, n, oh, ow, win.data());
    const std::uint8_t* ks = record.rotation.data() + slot * record.per_window();
    if (record.policy == ChannelPolicy::kShared) {
      apply_candidate_rotation(record.mode, ks[0], win.data(), rot.data(), F, C);
    } else {
      for (std::int64_t ch = 0; ch < C; ++ch) {
        for (std::int64_t i = 0; i < F * F; ++i) plane[static_cast<std::size_t>(i)] = win[static_cast<std::size_t>(i * C + ch)];
        apply_candidate_rotation(record.mode, ks[ch], plane.data(), plane_rot.data(), F, 1);
        for (std::int64_t i = 0; i < F * F; ++i) rot[static_cast<std::size_t>(i * C + ch)] = plane_rot[static_cast<std::size_t>(i)];
      }
    }
    detail::scatter_tile(tiled, n, oh, ow, rot.data(), F);
  }
  return tiled;
}

/// Routes gradients back through a recorded forward pass. The rotation choices
/// are treated as constants (as with max-pooling's argmax): each tile gradient
/// is rotated back by the inverse candidate rotation and scatter-added to the
/// input cells its window covered. Cells read from the padded border are
/// dropped. Output has the layer-input shape.
template <typename T>
Tensor<T> rrl_backward(const Tensor<T>& grad_tiled, const RotationRecord& record) {
  const WindowGrid& grid = record.grid;
  const std::int64_t F = grid.window;
  const std::int64_t N = record.batch, C = record.channels;
  if (grad_tiled.batch() != N || grad_tiled.height() != F * grid.out_h ||
      grad_tiled.width() != F * grid.out_w || grad_tiled.channels() != C) {
    throw std::invalid_argument("rrl_backward: gradient shape does not match record");
  }
  Tensor<T> grad_x(N, grid.in_h, grid.in_w, C);
  // Windows of the same sample overlap, so accumulation parallelizes over the
  // batch axis only; window order within a sample is fixed for determinism.
  parallel_for(N, [&](std::int64_t n) {
    thread_local std::vector<T> tile, unrot, plane, plane_rot;
    tile.resize(static_cast<std::size_t>(F * F * C));
    unrot.resize(static_cast<std::size_t>(F * F * C));
    plane.resize(static_cast<std::size_t>(F * F));
    plane_rot.resize(static_cast<std::size_t>(F * F));
    for (std::int64_t oh = 0; oh < grid.out_h; ++oh) {
      for (std::int64_t ow = 0; ow < grid.out_w; ++ow) {
        const std::int64_t slot = (n * grid.out_h + oh) * grid.out_w + ow;
        detail::gather_tile(grad_tiled, n, oh, ow, tile.data(), F);
        const std::uint8_t* ks = record.rotation.data() + slot * record.per_window();
        if (record.policy == ChannelPolicy::kShared) {
          const int inv = inverse_candidate_rotation(record.mode, ks[0]);
          apply_candidate_rotation(record.mode, inv, tile.data(), unrot.data(), F, C);
        } else {
          for (std::int64_t ch = 0; ch < C; ++ch) {
            for (std::int64_t i = 0; i < F * F; ++i) plane[static_cast<std::size_t>(i)] = tile[static_cast<std::size_t>(i * C + ch)];
            const int inv = inverse_candidate_rotation(record.mode, ks[ch]);
            apply_candidate_rotation(record.mode, inv, plane.data(), plane_rot.data(), F, 1);
            for (std::int64_t i = 0; i < F * F; ++i) unrot[static_cast<std::size_t>(i * C + ch)] = plane_rot[static_cast<std::size_t>(i)];
          }
        }
        for (std::int64_t fh = 0; fh < F; ++fh) {
          const std::int64_t sh = oh * grid.stride - grid.padding + fh;
          if (sh < 0 || sh >= grid.in_h) continue;
          for (std::int64_t fw = 0; fw < F; ++fw) {
            const std::int64_t sw = ow * grid.stride - grid.padding + fw;
            if (sw < 0 || sw >= grid.in_w) continue;
            T* dst = &grad_x(n, sh, sw, 0);
            const T* src = unrot.data() + (fh * F + fw) * C;
            for (std::int64_t c = 0; c < C; ++c) dst[c] += src[c];
          }
        }
      }
    }
  });
  return grad_x;
}

/// Rotation chosen per batch sample by the global canonicalization; all
/// channels of a sample rotate together.
struct GlobalRotationRecord {
  std::vector<std::uint8_t> rotation;  // clockwise quarter turns, one per sample
};

namespace detail {

/// Symmetric 3-way split of an axis of length n >= 3: the remainder goes to
/// the middle block (n % 3 == 1) or the outer blocks (n % 3 == 2), so the
/// block layout maps to itself under reversal and the pooled 3x3 reduction
/// commutes with quarter turns.
inline std::array<std::int64_t, 3> three_way_blocks(std::int64_t n) {
  const std::int64_t q = n / 3, s = n % 3;
  if (s == 0) return {q, q, q};
  if (s == 1) return {q, q + 1, q};
  return {q + 1, q, q + 1};
}

/// 3x3 deciding plane for the global canonicalization of a square map:
/// the center 3x3 of the channel-mean plane when H is odd, the symmetric
/// 3x3 block-average reduction when H is even. Returns false when the map is
/// too small for any 3x3 neighborhood (H < 3); callers then fall back to the
/// lexicographic rule alone.
template <typename T>
bool global_deciding_plane(const Tensor<T>& x, std::int64_t n, std::array<T, 9>& plane) {
  const std::int64_t H = x.height(), W = x.width(), C = x.channels();
  if (H < 3) return false;
  auto mean_at = [&](std::int64_t h, std::int64_t w) {
    T acc = T{0};
    for (std::int64_t c = 0; c < C; ++c) acc += x(n, h, w, c);
    return acc / static_cast<T>(C);
  };
  if (H % 2 == 1) {
    const std::int64_t ctr = H / 2;
    for (std::int64_t dh = -1; dh <= 1; ++dh) {
      for (std::int64_t dw = -1; dw <= 1; ++dw) {
        plane[static_cast<std::size_t>((dh + 1) * 3 + (dw + 1))] = mean_at(ctr + dh, ctr + dw);
      }
    }
    return true;
  }
  const auto blocks = three_way_blocks(H);
  std::array<std::int64_t, 4> edges{0, blocks[0], blocks[0] + blocks[1], H};
  for (int bh = 0; bh < 3; ++bh) {
    for (int bw = 0; bw < 3; ++bw) {
      T acc = T{0};
      std::int64_t count = 0;
      for (std::int64_t h = edges[static_cast<std::size_t>(bh)]; h < edges[static_cast<std::size_t>(bh + 1)]; ++h) {
        for (std::int64_t w = edges[static_cast<std::size_t>(bw)]; w < edges[static_cast<std::size_t>(bw + 1)]; ++w) {
          acc += mean_at(h, w);
          ++count;
        }
      }
      plane[static_cast<std::size_t>(bh * 3 + bw)] = acc / static_cast<T>(count);
    }
  }
  (void)W;
  return true;
}

}  // namespace detail

/// Treats each whole feature map as one window and canonicalizes its
/// orientation over the four quarter turns, converting per-window equivariance
/// into downstream invariance. The LBP decision reads a 3x3 summary of the
/// channel-mean plane; code ties fall back to exact lexicographic minimality
/// of the full flattened map, then to the smallest rotation index (at which
/// point all tied rotations carry identical content).
template <typename T>
std::pair<Tensor<T>, GlobalRotationRecord> global_rrl(const Tensor<T>& x) {
  if (x.height() != x.width()) {
    throw std::invalid_argument("global_rrl: map must be square in H,W");
  }
  const std::int64_t N = x.batch(), H = x.height(), W = x.width(), C = x.channels();
  Tensor<T> out(N, H, W, C);
  GlobalRotationRecord record;
  record.rotation.assign(static_cast<std::size_t>(N), 0);

  const std::size_t map_size = static_cast<std::size_t>(H * W * C);
  std::vector<T> cand(map_size), best(map_size);
  std::array<T, 9> deciding{};
  std::array<T, 9> rotated{};
  for (std::int64_t n = 0; n < N; ++n) {
    const T* src = &x(n, 0, 0, 0);
    const bool has_lbp = detail::global_deciding_plane(x, n, deciding);
    int best_k = 0;
    int best_code = 0;
    bool best_ready = false;
    for (int k = 0; k < 4; ++k) {
      int code = 0;
      if (has_lbp) {
        apply_candidate_rotation(LbpMode::kQuarter4, k, deciding.data(), rotated.data(),
                                 std::int64_t{3}, std::int64_t{1});
        code = lbp_code(std::span<const T>(rotated.data(), 9), 3);
      }
      if (k == 0) {
        best_code = code;
        continue;
      }
      if (code > best_code) continue;
      if (code < best_code) {
        best_code = code;
        best_k = k;
        best_ready = false;
        continue;
      }
      if (!best_ready) {
        apply_candidate_rotation(LbpMode::kQuarter4, best_k, src, best.data(), H, C);
        best_ready = true;
      }
      apply_candidate_rotation(LbpMode::kQuarter4, k, src, cand.data(), H, C);
      for (std::size_t i = 0; i < map_size; ++i) {
        if (cand[i] < best[i]) {
          best_k = k;
          std::swap(best, cand);
          break;
        }
        if (cand[i] > best[i]) break;
      }
    }
    record.rotation[static_cast<std::size_t>(n)] = static_cast<std::uint8_t>(best_k);
    T* dst = &out(n, 0, 0, 0);
    apply_candidate_rotation(LbpMode::kQuarter4, best_k, src, dst, H, C);
  }
  return {std::move(out), std::move(record)};
}

/// Inverse permutation of global_rrl for the backward pass.
template <typename T>
Tensor<T> global_rrl_backward(const Tensor<T>& grad_out, const GlobalRotationRecord& record) {
  if (grad_out.batch() != static_cast<std::int64_t>(record.rotation.size())) {
    throw std::invalid_argument("global_rrl_backward: batch does not match record");
  }
  const std::int64_t H = grad_out.height(), C = grad_out.channels();
  Tensor<T> grad_x(grad_out.batch(), H, grad_out.width(), C);
  for (std::int64_t n = 0; n < grad_out.batch(); ++n) {
    const int inv = inverse_candidate_rotation(LbpMode::kQuarter4,
                                               record.rotation[static_cast<std::size_t>(n)]);
    apply_candidate_rotation(LbpMode::kQuarter4, inv, &grad_out(n, 0, 0, 0),
                             &grad_x(n, 0, 0, 0), H, C);
  }
  return grad_x;
}

}  // namespace rrl
