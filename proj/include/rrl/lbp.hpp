#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "rrl/tensor.hpp"

namespace rrl {

/// Candidate rotation sets for window canonicalization.
///  - Ring8: the eight 45-degree ring shifts of a 3x3 window (center fixed).
///    Legal only for F = 3; on larger windows a 45-degree step is not a
///    permutation of the grid.
///  - Quarter4: the four quarter-turn grid rotations of the full window.
///    Legal for any odd F >= 3.
/// Both sets are closed under quarter turns, which is what makes the
/// canonical form identical for an input window and any quarter-turned copy.
enum class LbpMode { kRing8, kQuarter4 };

/// How a multi-channel window picks its rotation: Independent gives every
/// channel its own canonical rotation; Shared decides once on the channel-mean
/// plane and rotates all channels together.
enum class ChannelPolicy { kIndependent, kShared };

/// The eight neighbor offsets (dh, dw) of a 3x3 neighborhood, clockwise from
/// the top-left corner. Bit i of an LBP code corresponds to ring position i
/// with weight 2^i. Rotating window content clockwise by k*45 degrees moves
/// the content at ring position i to position (i+k) mod 8; a quarter turn
/// shifts by 2.
inline constexpr std::array<std::array<int, 2>, 8> kRingOffsets = {{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}}};

inline int candidate_rotation_count(LbpMode mode) {
  return mode == LbpMode::kRing8 ? 8 : 4;
}

inline void check_mode_legal(LbpMode mode, std::int64_t f) {
  if (f < 3 || f % 2 == 0) {
    throw std::invalid_argument("lbp: window size must be odd and >= 3");
  }
  if (mode == LbpMode::kRing8 && f != 3) {
    throw std::invalid_argument("lbp: Ring8 mode is only legal for 3x3 windows");
  }
}

/// 8-bit LBP code of the F x F single-channel plane (row-major): bit i is set
/// iff the neighbor of the center cell at ring position i is >= the center
/// value. Equal values count as 1.
template <typename T>
int lbp_code(std::span<const T> plane, std::int64_t f) {
  if (f < 3 || f % 2 == 0) {
    throw std::invalid_argument("lbp_code: window size must be odd and >= 3");
  }
  const std::int64_t ctr = f / 2;
  const T center = plane[static_cast<std::size_t>(ctr * f + ctr)];
  int code = 0;
  for (int i = 0; i < 8; ++i) {
    const std::int64_t h = ctr + kRingOffsets[static_cast<std::size_t>(i)][0];
    const std::int64_t w = ctr + kRingOffsets[static_cast<std::size_t>(i)][1];
    if (plane[static_cast<std::size_t>(h * f + w)] >= center) code |= 1 << i;
  }
  return code;
}

/// Applies candidate rotation k of `mode` to an f x f block with `channels`
/// interleaved values per cell (row-major, channels innermost). Rotations are
/// clockwise: Quarter4 k is k quarter turns of the grid, Ring8 k is a k*45
/// degree shift of the ring cells with the center cell fixed. src and dst must
/// not alias.
template <typename T>
void apply_candidate_rotation(LbpMode mode, int k, const T* src, T* dst,
                              std::int64_t f, std::int64_t channels) {
  const std::int64_t c = channels;
  if (mode == LbpMode::kQuarter4) {
    const int q = ((k % 4) + 4) % 4;
    for (std::int64_t h = 0; h < f; ++h) {
      for (std::int64_t w = 0; w < f; ++w) {
        std::int64_t sh = h, sw = w;
        switch (q) {
          case 0: break;
          case 1: sh = f - 1 - w; sw = h; break;
          case 2: sh = f - 1 - h; sw = f - 1 - w; break;
          default: sh = w; sw = f - 1 - h; break;
        }
        const T* s = src + (sh * f + sw) * c;
        T* d = dst + (h * f + w) * c;
        for (std::int64_t ch = 0; ch < c; ++ch) d[ch] = s[ch];
      }
    }
    return;
  }
  // Ring8: f == 3 by construction.
  const int shift = ((k % 8) + 8) % 8;
  const std::int64_t ctr = f / 2;
  for (std::int64_t ch = 0; ch < c; ++ch) {
    dst[(ctr * f + ctr) * c + ch] = src[(ctr * f + ctr) * c + ch];
  }
  for (int i = 0; i < 8; ++i) {
    const int j = (i + shift) % 8;
    const std::int64_t sh = ctr + kRingOffsets[static_cast<std::size_t>(i)][0];
    const std::int64_t sw = ctr + kRingOffsets[static_cast<std::size_t>(i)][1];
    const std::int64_t dh = ctr + kRingOffsets[static_cast<std::size_t>(j)][0];
    const std::int64_t dw = ctr + kRingOffsets[static_cast<std::size_t>(j)][1];
    const T* s = src + (sh * f + sw) * c;
    T* d = dst + (dh * f + dw) * c;
    for (std::int64_t ch = 0; ch < c; ++ch) d[ch] = s[ch];
  }
}

inline int inverse_candidate_rotation(LbpMode mode, int k) {
  const int n = candidate_rotation_count(mode);
  return (n - (k % n)) % n;
}

namespace detail {

/// Scratch buffers reused across per-window canonicalization calls.
template <typename T>
struct CanonScratch {
  std::vector<T> deciding;   // the plane the LBP decision is made on
  std::vector<T> rotated;    // candidate rotation of the deciding plane
  std::vector<T> lex_cand;   // candidate rotation of the tie-break block
  std::vector<T> lex_best;   // current best tie-break block
};

/// Picks the canonical rotation index for one window.
///
/// `deciding` is the f x f plane whose LBP code is minimized. `lex` is the
/// f x f x lex_c block used to break code ties (channels innermost); it is
/// rotated per candidate and compared in flattened row-major order. Selection
/// order: (1) smallest LBP code of the rotated deciding plane, (2) smallest
/// flattened tie-break block, compared exactly, (3) smallest rotation index.
/// Every criterion except (3) depends only on the candidate's rotated content,
/// and the candidate set is closed under quarter turns, so the selected
/// content is identical for the window and any quarter-turned copy of it; by
/// step (3) only rotations with bit-identical content remain, so the output
/// window never depends on the input orientation.
template <typename T>
int select_canonical_rotation(const T* deciding, const T* lex, std::int64_t f,
                              std::int64_t lex_c, LbpMode mode, CanonScratch<T>& s) {
  const int count = candidate_rotation_count(mode);
  const std::size_t plane_size = static_cast<std::size_t>(f * f);
  const std::size_t lex_size = static_cast<std::size_t>(f * f * lex_c);
  s.rotated.resize(plane_size);
  s.lex_cand.resize(lex_size);
  s.lex_best.resize(lex_size);

  int best_k = 0;
  int best_code = 0;
  bool best_lex_ready = false;
  for (int k = 0; k < count; ++k) {
    T* rot = s.rotated.data();
    if (k == 0) {
      std::copy(deciding, deciding + plane_size, rot);
    } else {
      apply_candidate_rotation(mode, k, deciding, rot, f, 1);
    }
    const int code = lbp_code(std::span<const T>(rot, plane_size), f);
    if (k == 0) {
      best_code = code;
      continue;
    }
    if (code > best_code) continue;
    if (code < best_code) {
      best_code = code;
      best_k = k;
      best_lex_ready = false;
      continue;
    }
    // Tied code: lexicographic comparison of the rotated tie-break blocks.
    if (!best_lex_ready) {
      if (best_k == 0) {
        std::copy(lex, lex + lex_size, s.lex_best.data());
      } else {
        apply_candidate_rotation(mode, best_k, lex, s.lex_best.data(), f, lex_c);
      }
      best_lex_ready = true;
    }
    apply_candidate_rotation(mode, k, lex, s.lex_cand.data(), f, lex_c);
    for (std::size_t i = 0; i < lex_size; ++i) {
      if (s.lex_cand[i] < s.lex_best[i]) {
        best_k = k;
        std::swap(s.lex_best, s.lex_cand);
        break;
      }
      if (s.lex_cand[i] > s.lex_best[i]) break;
      // equal: keep comparing; full tie keeps the smaller index
    }
  }
  return best_k;
}

}  // namespace detail

/// Result of canonicalizing one window: the rotated window (1 x F x F x C) and
/// the chosen rotation index per channel (Independent) or a single shared
/// index (Shared).
template <typename T>
struct CanonicalWindow {
  Tensor<T> window;
  std::vector<int> rotation;
};

/// Rotates a window to its canonical orientation: the candidate rotation with
/// the minimal LBP code, ties broken lexicographically. The canonical form is
/// invariant to quarter turns of the input window and is a fixed point:
/// canonicalizing a canonical window picks rotation 0.
template <typename T>
CanonicalWindow<T> canonical_rotation(const Tensor<T>& window, LbpMode mode,
                                      ChannelPolicy policy) {
  if (window.batch() != 1) {
    throw std::invalid_argument("canonical_rotation: expected a single window (batch 1)");
  }
  if (window.height() != window.width()) {
    throw std::invalid_argument("canonical_rotation: window must be square");
  }
  const std::int64_t f = window.height();
  const std::int64_t c = window.channels();
  check_mode_legal(mode, f);

  detail::CanonScratch<T> scratch;
  CanonicalWindow<T> out;
  out.window = Tensor<T>(1, f, f, c);
  const T* src = window.data().data();
  T* dst = out.window.data().data();

  if (policy == ChannelPolicy::kShared) {
    scratch.deciding.resize(static_cast<std::size_t>(f * f));
    for (std::int64_t i = 0; i < f * f; ++i) {
      T acc = T{0};
      for (std::int64_t ch = 0; ch < c; ++ch) acc += src[i * c + ch];
      scratch.deciding[static_cast<std::size_t>(i)] = acc / static_cast<T>(c);
    }
    const int k = detail::select_canonical_rotation(scratch.deciding.data(), src, f, c,
                                                    mode, scratch);
    apply_candidate_rotation(mode, k, src, dst, f, c);
    out.rotation.assign(1, k);
    return out;
  }

  // Independent: each channel plane decides for itself.
  std::vector<T> plane(static_cast<std::size_t>(f * f));
  std::vector<T> rotated(static_cast<std::size_t>(f * f));
  out.rotation.resize(static_cast<std::size_t>(c));
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < f * f; ++i) plane[static_cast<std::size_t>(i)] = src[i * c + ch];
    const int k = detail::select_canonical_rotation(plane.data(), plane.data(), f, 1,
                                                    mode, scratch);
    out.rotation[static_cast<std::size_t>(ch)] = k;
    apply_candidate_rotation(mode, k, plane.data(), rotated.data(), f, 1);
    for (std::int64_t i = 0; i < f * f; ++i) dst[i * c + ch] = rotated[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace rrl
