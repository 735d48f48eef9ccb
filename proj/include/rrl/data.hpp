#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrl/errors.hpp"
#include "rrl/geometry.hpp"
#include "rrl/rng.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Raised when a dataset file does not start with the expected magic number.
struct idx_magic_error : io_error {
  using io_error::io_error;
};

/// Raised when a dataset file ends before the declared payload.
struct idx_truncated_error : io_error {
  using io_error::io_error;
};

/// Raised when the image and label files disagree about the sample count.
struct idx_count_error : io_error {
  using io_error::io_error;
};

/// A labeled image collection. Every image is a (1, H, W, C) tensor and all
/// images share one shape; labels are class indices.
template <typename T>
struct Dataset {
  std::vector<Tensor<T>> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::int64_t size() const { return static_cast<std::int64_t>(images.size()); }
  std::int64_t height() const { return images.empty() ? 0 : images.front().height(); }
  std::int64_t width() const { return images.empty() ? 0 : images.front().width(); }
  std::int64_t channels() const { return images.empty() ? 0 : images.front().channels(); }
};

namespace detail {

class BigEndianReader {
 public:
  BigEndianReader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  std::uint32_t u32() {
    const unsigned char* p = take(4);
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
  }

  const unsigned char* take(std::size_t n) {
    if (data_.size() - pos_ < n) {
      throw idx_truncated_error("'" + path_ + "' is truncated");
    }
    const auto* p = reinterpret_cast<const unsigned char*>(data_.data()) + pos_;
    pos_ += n;
    return p;
  }

  bool exhausted() const { return pos_ == data_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string data_;
  std::string path_;
  std::size_t pos_ = 0;
};

inline std::string slurp_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw io_error("failed reading '" + path + "'");
  return data;
}

}  // namespace detail

/// Reads the classic big-endian dataset container: an image file with magic
/// 0x00000803 and dimensions (count, rows, cols) followed by one byte per
/// pixel, plus a label file with magic 0x00000801. Pixels are scaled to
/// [0, 1]. Bad magic, truncation, and count disagreement raise distinct
/// error types.
template <typename T>
Dataset<T> load_idx(const std::string& images_path, const std::string& labels_path) {
  detail::BigEndianReader imgs(detail::slurp_binary(images_path), images_path);
  const std::uint32_t img_magic = imgs.u32();
  if (img_magic != 0x00000803u) {
    throw idx_magic_error("'" + images_path + "' has magic " + std::to_string(img_magic) +
                          ", expected 2051 (0x803) for images");
  }
  const std::int64_t count = imgs.u32();
  const std::int64_t rows = imgs.u32();
  const std::int64_t cols = imgs.u32();

  detail::BigEndianReader labs(detail::slurp_binary(labels_path), labels_path);
  const std::uint32_t lab_magic = labs.u32();
  if (lab_magic != 0x00000801u) {
    throw idx_magic_error("'" + labels_path + "' has magic " + std::to_string(lab_magic) +
                          ", expected 2049 (0x801) for labels");
  }
  const std::int64_t lab_count = labs.u32();
  if (lab_count != count) {
    throw idx_count_error("'" + images_path + "' holds " + std::to_string(count) +
                          " images but '" + labels_path + "' holds " + std::to_string(lab_count) +
                          " labels");
  }

  Dataset<T> ds;
  ds.images.reserve(static_cast<std::size_t>(count));
  ds.labels.reserve(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) {
    const unsigned char* px = imgs.take(static_cast<std::size_t>(rows * cols));
    Tensor<T> img(1, rows, cols, 1);
    for (std::int64_t j = 0; j < rows * cols; ++j) {
      img.data()[static_cast<std::size_t>(j)] = static_cast<T>(px[j]) / static_cast<T>(255);
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(static_cast<int>(*labs.take(1)));
  }
  return ds;
}

/// Writes a dataset back out in the same container format. Images must be
/// single-channel; values are clamped to [0, 1] and quantized to bytes.
template <typename T>
void save_idx(const Dataset<T>& ds, const std::string& images_path,
              const std::string& labels_path) {
  if (!ds.images.empty() && ds.channels() != 1) {
    throw io_error("save_idx: only single-channel images can be written");
  }
  const auto be32 = [](std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  };
  std::string img_bytes, lab_bytes;
  be32(img_bytes, 0x00000803u);
  be32(img_bytes, static_cast<std::uint32_t>(ds.size()));
  be32(img_bytes, static_cast<std::uint32_t>(ds.height()));
  be32(img_bytes, static_cast<std::uint32_t>(ds.width()));
  be32(lab_bytes, 0x00000801u);
  be32(lab_bytes, static_cast<std::uint32_t>(ds.size()));
  for (std::int64_t i = 0; i < ds.size(); ++i) {
    for (const T v : ds.images[static_cast<std::size_t>(i)].data()) {
      const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
      img_bytes.push_back(static_cast<char>(std::lround(clamped * 255.0)));
    }
    lab_bytes.push_back(static_cast<char>(ds.labels[static_cast<std::size_t>(i)]));
  }
  const auto dump = [](const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw io_error("failed writing '" + path + "'");
  };
  dump(images_path, img_bytes);
  dump(labels_path, lab_bytes);
}

namespace detail {

inline std::string pnm_token(std::istream& in, const std::string& path) {
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
    } else if (!std::isspace(c)) {
      break;
    }
  }
  if (c == EOF) throw io_error("'" + path + "': truncated image header");
  std::string tok(1, static_cast<char>(c));
  while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
  return tok;
}

inline std::int64_t pnm_int(std::istream& in, const std::string& path, const char* what) {
  const std::string tok = pnm_token(in, path);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size() || v < 0) throw std::invalid_argument("bad");
    return v;
  } catch (const std::exception&) {
    throw io_error("'" + path + "': malformed header, " + std::string(what) + " is '" + tok + "'");
  }
}

}  // namespace detail

/// Decodes a binary graymap (P5) or pixmap (P6) into a (1, H, W, C) tensor
/// scaled to [0, 1]. Both 1- and 2-byte sample depths are handled.
template <typename T>
Tensor<T> load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open image '" + path + "'");
  const std::string magic = detail::pnm_token(in, path);
  std::int64_t channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw io_error("'" + path + "': unsupported image magic '" + magic + "' (want P5 or P6)");
  }
  const std::int64_t w = detail::pnm_int(in, path, "width");
  const std::int64_t h = detail::pnm_int(in, path, "height");
  const std::int64_t maxval = detail::pnm_int(in, path, "maxval");
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw io_error("'" + path + "': malformed header dimensions");
  }
  const int bytes_per_sample = maxval < 256 ? 1 : 2;
  const std::int64_t samples = h * w * channels;
  std::vector<unsigned char> raw(static_cast<std::size_t>(samples * bytes_per_sample));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw io_error("'" + path + "': truncated pixel data");
  }
  Tensor<T> img(1, h, w, channels);
  for (std::int64_t s = 0; s < samples; ++s) {
    std::int64_t v;
    if (bytes_per_sample == 1) {
      v = raw[static_cast<std::size_t>(s)];
    } else {
      v = (static_cast<std::int64_t>(raw[static_cast<std::size_t>(2 * s)]) << 8) |
          raw[static_cast<std::size_t>(2 * s + 1)];
    }
    img.data()[static_cast<std::size_t>(s)] = static_cast<T>(v) / static_cast<T>(maxval);
  }
  return img;
}

/// Writes a single-channel (1, H, W, 1) tensor as a binary graymap with
/// values clamped to [0, 1] and quantized to bytes.
template <typename T>
void write_pgm(const std::string& path, const Tensor<T>& img) {
  if (img.batch() != 1 || img.channels() != 1) {
    throw io_error("write_pgm: expected a single grayscale image");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open '" + path + "' for writing");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (const T v : img.data()) {
    const double clamped = std::clamp(static_cast<double>(v), 0.0, 1.0);
    out.put(static_cast<char>(std::lround(clamped * 255.0)));
  }
  out.flush();
  if (!out) throw io_error("failed writing '" + path + "'");
}

/// Loads images listed in a "filename,label" manifest. Paths are resolved
/// relative to `dir`; all images must share one shape.
template <typename T>
Dataset<T> load_image_dir(const std::string& dir, const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw io_error("cannot open manifest '" + manifest_path + "'");
  Dataset<T> ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::size_t comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size()) {
      throw io_error(manifest_path + " line " + std::to_string(line_no) +
                     ": expected 'filename,label'");
    }
    const std::string name = line.substr(0, comma);
    const std::string label_text = line.substr(comma + 1);
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(label_text, &used);
      if (used != label_text.size() || label < 0) throw std::invalid_argument("bad");
    } catch (const std::exception&) {
      throw io_error(manifest_path + " line " + std::to_string(line_no) + ": bad label '" +
                     label_text + "'");
    }
    Tensor<T> img = load_pnm<T>(dir + "/" + name);
    if (!ds.images.empty() && !img.same_shape(ds.images.front())) {
      throw io_error(manifest_path + " line " + std::to_string(line_no) + ": image '" + name +
                     "' does not match the shape of earlier images");
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  if (in.bad()) throw io_error("failed reading manifest '" + manifest_path + "'");
  return ds;
}

/// Applies the inscribed-circle mask to every image.
template <typename T>
Dataset<T> mask_dataset(const Dataset<T>& ds, T fill = T{0}) {
  Dataset<T> out;
  out.labels = ds.labels;
  out.class_names = ds.class_names;
  out.images.reserve(ds.images.size());
  for (const auto& img : ds.images) out.images.push_back(inscribed_circle_mask(img, fill));
  return out;
}

namespace detail {

template <typename T>
void require_square(const Dataset<T>& ds, const char* what) {
  for (const auto& img : ds.images) {
    if (img.height() != img.width()) {
      throw std::invalid_argument(std::string(what) + ": images must be square");
    }
  }
}

}  // namespace detail

/// Each image rotated by an independent uniform draw from {0, 90, 180, 270}
/// degrees, then inscribed-circle masked. Labels are untouched.
template <typename T>
Dataset<T> make_rot_testset(const Dataset<T>& ds, std::uint64_t seed) {
  detail::require_square(ds, "make_rot_testset");
  Rng rng(seed);
  Dataset<T> out;
  out.labels = ds.labels;
  out.class_names = ds.class_names;
  out.images.reserve(ds.images.size());
  for (const auto& img : ds.images) {
    const int k = static_cast<int>(rng.uniform_index(4));
    out.images.push_back(inscribed_circle_mask(rot90(img, k), T{0}));
  }
  return out;
}

/// Each image rotated by an independent uniform angle in [0, 360) degrees via
/// bilinear resampling (black fill), then inscribed-circle masked.
template <typename T>
Dataset<T> make_rotplus_testset(const Dataset<T>& ds, std::uint64_t seed) {
  detail::require_square(ds, "make_rotplus_testset");
  Rng rng(seed);
  Dataset<T> out;
  out.labels = ds.labels;
  out.class_names = ds.class_names;
  out.images.reserve(ds.images.size());
  for (const auto& img : ds.images) {
    const double theta = rng.uniform(0.0, 360.0);
    out.images.push_back(inscribed_circle_mask(rotate_bilinear(img, theta, T{0}), T{0}));
  }
  return out;
}

inline const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names = {"mono", "duo",  "twin", "triad", "trio",
                                                 "arc",  "kite", "fan",  "span",  "nest"};
  return names;
}

/// Procedurally drawn 10-class stroke-shape set on an H x H single-channel
/// canvas. Position, scale, intensity and pixel noise are jittered per image;
/// labels are assigned round-robin so every class appears equally often.
template <typename T>
Dataset<T> make_synthetic_dataset(std::int64_t count, std::uint64_t seed, std::int64_t side = 28) {
  if (count < 1) throw std::invalid_argument("make_synthetic_dataset: count must be positive");
  if (side < 16) throw std::invalid_argument("make_synthetic_dataset: side must be at least 16");
  Rng rng(seed);
  Dataset<T> ds;
  ds.class_names = synthetic_class_names();
  ds.images.reserve(static_cast<std::size_t>(count));
  ds.labels.reserve(static_cast<std::size_t>(count));

  const double u = static_cast<double>(side) / 28.0;  // everything below is in 28-grid units

  for (std::int64_t i = 0; i < count; ++i) {
    const int label = static_cast<int>(i % 10);
    Tensor<T> img(1, side, side, 1);

    const double a = rng.uniform(0.7, 1.0);       // foreground intensity
    const double s = rng.uniform(0.85, 1.15);     // size jitter
    const double dy = rng.uniform(-1.5, 1.5) * u; // position jitter
    const double dx = rng.uniform(-1.5, 1.5) * u;

    // Pixel (h, w) is tested at its center (h + 0.5, w + 0.5), in 28-grid
    // units scaled by u.
    const auto paint = [&](auto&& inside) {
      for (std::int64_t h = 0; h < side; ++h) {
        for (std::int64_t w = 0; w < side; ++w) {
          const double y = static_cast<double>(h) + 0.5;
          const double x = static_cast<double>(w) + 0.5;
          const double v = inside(y, x);
          if (v > 0.0) img(0, h, w, 0) = static_cast<T>(v);
        }
      }
    };
    // Every class is a constellation of a few fat, smooth-profiled blobs
    // sitting well away from the image center, like the pips on dice.
    // Smooth wide blobs keep local pixel orderings stable (no aliasing
    // accidents), and content far from the center moves a long way per
    // degree of rotation. Constellations differ by blob count, angular gaps,
    // sizes, and the presence of a center pip; no class matches itself or
    // any other class under quarter or half turns, which is what makes an
    // upright-trained baseline stumble on rotated copies.
    const auto soft_blob = [&](double y, double x, double cy, double cx, double r) {
      const double py = y - cy * u - dy, px = x - cx * u - dx;
      const double t = 1.0 - (py * py + px * px) / (r * r);
      return t > 0.0 ? a * t : 0.0;
    };
    // Pip centered at `deg` degrees on a circle of radius 7 around the
    // canvas center, with blob radius rb (all in 28-grid units).
    const auto pip = [&](double y, double x, double deg, double rb) {
      const double rad = deg * 3.14159265358979323846 / 180.0;
      const double cy = 14.0 - 7.0 * std::sin(rad);
      const double cx = 14.0 + 7.0 * std::cos(rad);
      return soft_blob(y, x, cy, cx, rb * s * u);
    };

    switch (label) {
      case 0: {  // mono: center pip plus one pip to the east
        paint([&](double y, double x) {
          return std::max(soft_blob(y, x, 14, 14, 2.4 * s * u), pip(y, x, 0, 3.4));
        });
        break;
      }
      case 1: {  // duo: two pips 150 degrees apart
        paint([&](double y, double x) { return std::max(pip(y, x, 0, 3.2), pip(y, x, 150, 3.2)); });
        break;
      }
      case 2: {  // twin: two pips 60 degrees apart
        paint([&](double y, double x) { return std::max(pip(y, x, 0, 3.2), pip(y, x, 60, 3.2)); });
        break;
      }
      case 3: {  // triad: three evenly spaced pips
        paint([&](double y, double x) {
          return std::max({pip(y, x, 0, 3.0), pip(y, x, 120, 3.0), pip(y, x, 240, 3.0)});
        });
        break;
      }
      case 4: {  // trio: three pips with gaps 60/120/180
        paint([&](double y, double x) {
          return std::max({pip(y, x, 0, 3.0), pip(y, x, 60, 3.0), pip(y, x, 180, 3.0)});
        });
        break;
      }
      case 5: {  // arc: three pips bunched over a quarter of the rim
        paint([&](double y, double x) {
          return std::max({pip(y, x, 0, 3.0), pip(y, x, 45, 3.0), pip(y, x, 90, 3.0)});
        });
        break;
      }
      case 6: {  // kite: four pips, one gap squeezed
        paint([&](double y, double x) {
          return std::max({pip(y, x, 0, 2.8), pip(y, x, 90, 2.8), pip(y, x, 180, 2.8),
                           pip(y, x, 240, 2.8)});
        });
        break;
      }
      case 7: {  // fan: four pips over half the rim
        paint([&](double y, double x) {
          return std::max({pip(y, x, 0, 2.8), pip(y, x, 45, 2.8), pip(y, x, 90, 2.8),
                           pip(y, x, 135, 2.8)});
        });
        break;
      }
      case 8: {  // span: a large pip east, a small pip north
        paint([&](double y, double x) { return std::max(pip(y, x, 0, 4.2), pip(y, x, 90, 2.0)); });
        break;
      }
      case 9: {  // nest: a large center pip with pips west and south
        paint([&](double y, double x) {
          return std::max({soft_blob(y, x, 14, 14, 4.4 * s * u), pip(y, x, 180, 2.6),
                           pip(y, x, 270, 2.6)});
        });
        break;
      }
    }

    for (auto& v : img.data()) {
      const double noisy = static_cast<double>(v) + rng.uniform(-0.04, 0.04);
      v = static_cast<T>(std::clamp(noisy, 0.0, 1.0));
    }
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

/// First `count` samples of a dataset.
template <typename T>
Dataset<T> subset(const Dataset<T>& ds, std::int64_t count) {
  if (count < 0 || count > ds.size()) throw std::invalid_argument("subset: count out of range");
  Dataset<T> out;
  out.class_names = ds.class_names;
  out.images.assign(ds.images.begin(), ds.images.begin() + count);
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + count);
  return out;
}

/// Stacks the images at `indices` into one (B, H, W, C) batch tensor.
template <typename T>
Tensor<T> stack_images(const Dataset<T>& ds, const std::vector<std::int64_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("stack_images: empty batch");
  const Tensor<T>& first = ds.images.at(static_cast<std::size_t>(indices[0]));
  Tensor<T> out(static_cast<std::int64_t>(indices.size()), first.height(), first.width(),
                first.channels());
  const std::size_t per = first.data().size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor<T>& img = ds.images.at(static_cast<std::size_t>(indices[b]));
    std::copy(img.data().begin(), img.data().end(), out.data().begin() + b * per);
  }
  return out;
}

template <typename T>
std::vector<int> gather_labels(const Dataset<T>& ds, const std::vector<std::int64_t>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (const auto i : indices) out.push_back(ds.labels.at(static_cast<std::size_t>(i)));
  return out;
}

}  // namespace rrl
