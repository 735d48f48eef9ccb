#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rrl/errors.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Axis-aligned box in pixel-edge coordinates, covering pixels
/// [x1, x2) x [y1, y2): x runs along the width axis, y along the height axis,
/// and the stored corners are upper-left and lower-right.
struct BBox {
  std::int64_t x1 = 0;
  std::int64_t y1 = 0;
  std::int64_t x2 = 0;
  std::int64_t y2 = 0;

  bool operator==(const BBox&) const = default;
};

/// Maps a box through n counterclockwise quarter turns of a W x H canvas.
/// One turn sends point (x, y) to (y, W - x); applied to both corners and
/// re-normalized (the mapped corners are lower-left and upper-right, so the
/// coordinates are reordered), one turn gives (y1, W - x2, y2, W - x1) on a
/// canvas whose width and height have swapped.
inline BBox rotate_bbox(BBox b, int n, std::int64_t width, std::int64_t height) {
  if (n < 0 || n > 3) throw std::invalid_argument("rotate_bbox: n must be in 0..3");
  if (width < 1 || height < 1) throw std::invalid_argument("rotate_bbox: empty canvas");
  if (b.x1 >= b.x2 || b.y1 >= b.y2) throw std::invalid_argument("rotate_bbox: degenerate box");
  if (b.x1 < 0 || b.y1 < 0 || b.x2 > width || b.y2 > height) {
    throw std::invalid_argument("rotate_bbox: box exceeds the canvas");
  }
  for (int i = 0; i < n; ++i) {
    b = BBox{b.y1, width - b.x2, b.y2, width - b.x1};
    std::swap(width, height);
  }
  return b;
}

/// True when pixel (h, w) of an H x W image lies inside the largest inscribed
/// circle (center of the image, radius min(H, W) / 2). Evaluated in integers
/// on doubled coordinates, so the answer is exact and the kept set maps to
/// itself under quarter turns.
inline bool inside_inscribed_circle(std::int64_t h, std::int64_t w, std::int64_t height,
                                    std::int64_t width) {
  const std::int64_t dy = 2 * h + 1 - height;
  const std::int64_t dx = 2 * w + 1 - width;
  const std::int64_t d = std::min(height, width);
  return dy * dy + dx * dx <= d * d;
}

/// Replaces every pixel outside the inscribed circle with `fill`, across all
/// channels and batch samples.
template <typename T>
Tensor<T> inscribed_circle_mask(const Tensor<T>& t, T fill) {
  Tensor<T> out = t;
  const std::int64_t H = t.height(), W = t.width(), C = t.channels();
  for (std::int64_t n = 0; n < t.batch(); ++n) {
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t w = 0; w < W; ++w) {
        if (!inside_inscribed_circle(h, w, H, W)) {
          for (std::int64_t c = 0; c < C; ++c) out(n, h, w, c) = fill;
        }
      }
    }
  }
  return out;
}

struct LabeledBox {
  std::string label;
  BBox box;

  bool operator==(const LabeledBox&) const = default;
};

/// Parses "label x1 y1 x2 y2" lines. Blank lines and '#' comments are
/// skipped. Throws io_error naming the offending line.
inline std::vector<LabeledBox> parse_boxes(const std::string& text,
                                           const std::string& origin = "boxes") {
  std::vector<LabeledBox> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream toks(line);
    std::string label;
    if (!(toks >> label) || label[0] == '#') continue;
    LabeledBox lb;
    lb.label = label;
    std::int64_t* fields[4] = {&lb.box.x1, &lb.box.y1, &lb.box.x2, &lb.box.y2};
    for (auto* f : fields) {
      if (!(toks >> *f)) {
        throw io_error(origin + " line " + std::to_string(line_no) +
                       ": expected 'label x1 y1 x2 y2'");
      }
    }
    std::string extra;
    if (toks >> extra) {
      throw io_error(origin + " line " + std::to_string(line_no) + ": trailing token '" + extra +
                     "'");
    }
    if (lb.box.x1 >= lb.box.x2 || lb.box.y1 >= lb.box.y2) {
      throw io_error(origin + " line " + std::to_string(line_no) + ": degenerate box");
    }
    out.push_back(std::move(lb));
  }
  return out;
}

inline std::vector<LabeledBox> load_box_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open box file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw io_error("failed reading box file '" + path + "'");
  return parse_boxes(buf.str(), path);
}

inline std::string format_boxes(const std::vector<LabeledBox>& boxes) {
  std::ostringstream out;
  for (const auto& lb : boxes) {
    out << lb.label << ' ' << lb.box.x1 << ' ' << lb.box.y1 << ' ' << lb.box.x2 << ' '
        << lb.box.y2 << '\n';
  }
  return out.str();
}

inline void save_box_file(const std::string& path, const std::vector<LabeledBox>& boxes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << format_boxes(boxes);
  out.flush();
  if (!out) throw io_error("failed writing '" + path + "'");
}

}  // namespace rrl
