#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rrl/checkpoint.hpp"
#include "rrl/errors.hpp"
#include "rrl/lbp.hpp"
#include "rrl/nn.hpp"
#include "rrl/rng.hpp"
#include "rrl/rrl.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

enum class LayerKind {
  kRrl,        // canonicalize sliding windows; consumed by the conv that follows
  kConv,       // cross-correlation + bias
  kMaxPool,    // 2x2 stride 2
  kAvgPool,    // 2x2 stride 2
  kRelu,
  kGlobalRrl,  // canonicalize the whole feature map as one window
  kFlatten,
  kDense,
  kSoftmax,    // only as the last layer, on a flattened vector
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kRrl: return "rrl";
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kGlobalRrl: return "globalrrl";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kDense: return "dense";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

struct LayerSpec {
  LayerKind kind;
  LbpMode mode = LbpMode::kQuarter4;                    // rrl
  ChannelPolicy policy = ChannelPolicy::kIndependent;   // rrl
  std::int64_t window = 0;                              // conv
  std::int64_t out_channels = 0;                        // conv
  std::int64_t stride = 0;                              // conv
  std::int64_t out_features = 0;                        // dense

  static LayerSpec rrl(LbpMode m, ChannelPolicy p = ChannelPolicy::kIndependent) {
    LayerSpec s{LayerKind::kRrl};
    s.mode = m;
    s.policy = p;
    return s;
  }
  static LayerSpec conv(std::int64_t f, std::int64_t c_out, std::int64_t stride) {
    LayerSpec s{LayerKind::kConv};
    s.window = f;
    s.out_channels = c_out;
    s.stride = stride;
    return s;
  }
  static LayerSpec maxpool() { return LayerSpec{LayerKind::kMaxPool}; }
  static LayerSpec avgpool() { return LayerSpec{LayerKind::kAvgPool}; }
  static LayerSpec relu() { return LayerSpec{LayerKind::kRelu}; }
  static LayerSpec global_rrl() { return LayerSpec{LayerKind::kGlobalRrl}; }
  static LayerSpec flatten() { return LayerSpec{LayerKind::kFlatten}; }
  static LayerSpec dense(std::int64_t out) {
    LayerSpec s{LayerKind::kDense};
    s.out_features = out;
    return s;
  }
  static LayerSpec softmax() { return LayerSpec{LayerKind::kSoftmax}; }
};

struct NetworkConfig {
  std::int64_t in_h = 0;
  std::int64_t in_w = 0;
  std::int64_t in_c = 0;
  std::int64_t classes = 0;
  int precision = 32;  // 32 or 64; selects the float width at the CLI boundary
  std::vector<LayerSpec> layers;
};

struct LayerShape {
  std::int64_t h = 0;
  std::int64_t w = 0;
  std::int64_t c = 0;
};

struct ShapeWalk {
  std::vector<LayerShape> inputs;          // inputs[i] = shape entering layer i
  LayerShape output;                       // shape leaving the last layer
  std::vector<std::int64_t> rrl_windows;   // per layer; window for rrl layers, 0 otherwise
};

namespace detail {

[[noreturn]] inline void layer_error(std::size_t index, LayerKind kind, const std::string& msg) {
  throw config_error("layer " + std::to_string(index + 1) + " (" + layer_kind_name(kind) +
                     "): " + msg);
}

}  // namespace detail

/// Walks the activation shape through every layer, checking each layer's
/// structural requirements. Throws config_error naming the offending layer.
inline ShapeWalk validate_config(const NetworkConfig& cfg) {
  if (cfg.in_h < 1 || cfg.in_w < 1 || cfg.in_c < 1) {
    throw config_error("input dimensions must be positive");
  }
  if (cfg.classes < 2) throw config_error("classes must be at least 2");
  if (cfg.precision != 32 && cfg.precision != 64) {
    throw config_error("precision must be 32 or 64");
  }
  if (cfg.layers.empty()) throw config_error("network needs at least one layer");

  ShapeWalk walk;
  walk.rrl_windows.assign(cfg.layers.size(), 0);
  LayerShape s{cfg.in_h, cfg.in_w, cfg.in_c};
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& spec = cfg.layers[i];
    walk.inputs.push_back(s);
    switch (spec.kind) {
      case LayerKind::kRrl: {
        if (i + 1 >= cfg.layers.size() || cfg.layers[i + 1].kind != LayerKind::kConv) {
          detail::layer_error(i, spec.kind, "must be immediately followed by a conv layer");
        }
        const LayerSpec& conv = cfg.layers[i + 1];
        if (conv.stride != conv.window) {
          detail::layer_error(i, spec.kind,
                              "the conv that consumes canonicalized tiles must have "
                              "stride equal to its window");
        }
        const std::int64_t f = conv.window;
        if (s.h != s.w) detail::layer_error(i, spec.kind, "requires a square input map");
        if (f < 3 || f % 2 == 0) {
          detail::layer_error(i, spec.kind, "window must be odd and at least 3");
        }
        if (spec.mode == LbpMode::kRing8 && f != 3) {
          detail::layer_error(i, spec.kind, "ring8 mode requires a 3x3 window");
        }
        if (s.h < f) detail::layer_error(i, spec.kind, "input smaller than window");
        walk.rrl_windows[i] = f;
        const std::int64_t oh = s.h - f + 1;
        s = LayerShape{f * oh, f * oh, s.c};
        break;
      }
      case LayerKind::kConv: {
        if (spec.window < 1 || spec.out_channels < 1 || spec.stride < 1) {
          detail::layer_error(i, spec.kind, "window, channels and stride must be positive");
        }
        if (s.h < spec.window || s.w < spec.window ||
            (s.h - spec.window) % spec.stride != 0 || (s.w - spec.window) % spec.stride != 0) {
          detail::layer_error(i, spec.kind,
                              "(input - window) must be divisible by stride in both axes");
        }
        s = LayerShape{(s.h - spec.window) / spec.stride + 1,
                       (s.w - spec.window) / spec.stride + 1, spec.out_channels};
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        if (s.h % 2 != 0 || s.w % 2 != 0) {
          detail::layer_error(i, spec.kind, "input height and width must be even");
        }
        s = LayerShape{s.h / 2, s.w / 2, s.c};
        break;
      }
      case LayerKind::kRelu:
        break;
      case LayerKind::kGlobalRrl: {
        if (s.h != s.w) detail::layer_error(i, spec.kind, "requires a square input map");
        break;
      }
      case LayerKind::kFlatten: {
        s = LayerShape{1, 1, s.h * s.w * s.c};
        break;
      }
      case LayerKind::kDense: {
        if (s.h != 1 || s.w != 1) {
          detail::layer_error(i, spec.kind, "requires a flattened input vector");
        }
        if (spec.out_features < 1) detail::layer_error(i, spec.kind, "output size must be positive");
        s = LayerShape{1, 1, spec.out_features};
        break;
      }
      case LayerKind::kSoftmax: {
        if (i + 1 != cfg.layers.size()) {
          detail::layer_error(i, spec.kind, "only allowed as the last layer");
        }
        if (s.h != 1 || s.w != 1) {
          detail::layer_error(i, spec.kind, "requires a flattened input vector");
        }
        break;
      }
    }
  }
  if (s.h != 1 || s.w != 1 || s.c != cfg.classes) {
    std::ostringstream msg;
    msg << "network output is " << s.h << "x" << s.w << "x" << s.c << ", expected 1x1x"
        << cfg.classes;
    throw config_error(msg.str());
  }
  walk.output = s;
  return walk;
}

namespace detail {

template <typename T>
Tensor<T> reshape(const Tensor<T>& t, std::int64_t h, std::int64_t w, std::int64_t c) {
  Tensor<T> out(t.batch(), h, w, c);
  if (out.size() != t.size()) throw std::invalid_argument("reshape: element count mismatch");
  out.data() = t.data();
  return out;
}

}  // namespace detail

/// Everything forward() records so backward() can replay the computation:
/// acts[0] is the network input, acts[i + 1] the output of layer i. Rotation
/// choices and pooling argmax positions are stored per layer.
template <typename T>
struct Trace {
  std::vector<Tensor<T>> acts;
  std::vector<RotationRecord> rotations;
  std::vector<GlobalRotationRecord> global_rotations;
  std::vector<std::vector<std::uint8_t>> argmaxes;

  const Tensor<T>& output() const { return acts.back(); }
};

template <typename T>
class Network {
 public:
  Network(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    walk_ = validate_config(cfg_);
    Rng rng(seed);
    slot_.assign(cfg_.layers.size(), -1);
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
      const LayerSpec& spec = cfg_.layers[i];
      const LayerShape in = walk_.inputs[i];
      if (spec.kind == LayerKind::kConv) {
        slot_[i] = static_cast<std::int64_t>(convs_.size());
        ConvSlot slot;
        slot.p = make_conv<T>(spec.window, in.c, spec.out_channels, spec.stride, rng);
        slot.grad_kernels = Tensor<T>(spec.out_channels, spec.window, spec.window, in.c);
        slot.grad_bias = Tensor<T>(1, 1, 1, spec.out_channels);
        convs_.push_back(std::move(slot));
      } else if (spec.kind == LayerKind::kDense) {
        slot_[i] = static_cast<std::int64_t>(denses_.size());
        DenseSlot slot;
        slot.p = make_dense<T>(in.c, spec.out_features, rng);
        slot.grad_weights = Tensor<T>(1, 1, in.c, spec.out_features);
        slot.grad_bias = Tensor<T>(1, 1, 1, spec.out_features);
        denses_.push_back(std::move(slot));
      }
    }
  }

  const NetworkConfig& config() const { return cfg_; }
  const ShapeWalk& shapes() const { return walk_; }

  Trace<T> forward(const Tensor<T>& x) const {
    if (x.height() != cfg_.in_h || x.width() != cfg_.in_w || x.channels() != cfg_.in_c) {
      throw std::invalid_argument("forward: input shape does not match the network");
    }
    Trace<T> trace;
    const std::size_t L = cfg_.layers.size();
    trace.acts.reserve(L + 1);
    trace.rotations.resize(L);
    trace.global_rotations.resize(L);
    trace.argmaxes.resize(L);
    trace.acts.push_back(x);
    for (std::size_t i = 0; i < L; ++i) {
      const LayerSpec& spec = cfg_.layers[i];
      const Tensor<T>& act = trace.acts.back();
      switch (spec.kind) {
        case LayerKind::kRrl: {
          const WindowGrid grid(act.height(), act.width(), walk_.rrl_windows[i]);
          auto [out, record] = rrl_forward(act, grid, spec.mode, spec.policy);
          trace.rotations[i] = std::move(record);
          trace.acts.push_back(std::move(out));
          break;
        }
        case LayerKind::kConv:
          trace.acts.push_back(conv_forward(act, convs_[slot_[i]].p));
          break;
        case LayerKind::kMaxPool: {
          auto [out, argmax] = maxpool2_forward(act);
          trace.argmaxes[i] = std::move(argmax);
          trace.acts.push_back(std::move(out));
          break;
        }
        case LayerKind::kAvgPool:
          trace.acts.push_back(avgpool2_forward(act));
          break;
        case LayerKind::kRelu:
          trace.acts.push_back(relu_forward(act));
          break;
        case LayerKind::kGlobalRrl: {
          auto [out, record] = global_rrl(act);
          trace.global_rotations[i] = std::move(record);
          trace.acts.push_back(std::move(out));
          break;
        }
        case LayerKind::kFlatten:
          trace.acts.push_back(
              detail::reshape(act, 1, 1, act.height() * act.width() * act.channels()));
          break;
        case LayerKind::kDense:
          trace.acts.push_back(dense_forward(act, denses_[slot_[i]].p));
          break;
        case LayerKind::kSoftmax:
          trace.acts.push_back(softmax(act));
          break;
      }
    }
    return trace;
  }

  /// Accumulates parameter gradients for the recorded forward pass and
  /// returns the gradient with respect to the network input.
  Tensor<T> backward(const Trace<T>& trace, const Tensor<T>& grad_output) {
    const std::size_t L = cfg_.layers.size();
    if (trace.acts.size() != L + 1) {
      throw std::invalid_argument("backward: trace does not match this network");
    }
    Tensor<T> grad = grad_output;
    for (std::size_t r = 0; r < L; ++r) {
      const std::size_t i = L - 1 - r;
      const LayerSpec& spec = cfg_.layers[i];
      const Tensor<T>& in = trace.acts[i];
      switch (spec.kind) {
        case LayerKind::kRrl:
          grad = rrl_backward(grad, trace.rotations[i]);
          break;
        case LayerKind::kConv: {
          ConvSlot& slot = convs_[slot_[i]];
          ConvGrads<T> g = conv_backward(in, slot.p, grad);
          accumulate(slot.grad_kernels, g.grad_kernels);
          accumulate(slot.grad_bias, g.grad_bias);
          grad = std::move(g.grad_x);
          break;
        }
        case LayerKind::kMaxPool:
          grad = maxpool2_backward(grad, trace.argmaxes[i], in.height(), in.width());
          break;
        case LayerKind::kAvgPool:
          grad = avgpool2_backward(grad, in.height(), in.width());
          break;
        case LayerKind::kRelu:
          grad = relu_backward(in, grad);
          break;
        case LayerKind::kGlobalRrl:
          grad = global_rrl_backward(grad, trace.global_rotations[i]);
          break;
        case LayerKind::kFlatten:
          grad = detail::reshape(grad, in.height(), in.width(), in.channels());
          break;
        case LayerKind::kDense: {
          DenseSlot& slot = denses_[slot_[i]];
          DenseGrads<T> g = dense_backward(in, slot.p, grad);
          accumulate(slot.grad_weights, g.grad_weights);
          accumulate(slot.grad_bias, g.grad_bias);
          grad = std::move(g.grad_x);
          break;
        }
        case LayerKind::kSoftmax:
          throw std::logic_error("backward through softmax is not supported; train on logits");
      }
    }
    return grad;
  }

  /// Named parameters with their gradient accumulators, in layer order.
  /// Names are stable (conv1.kernels, conv1.bias, dense1.weights, ...) and
  /// define the checkpoint layout.
  std::vector<std::tuple<std::string, Tensor<T>*, Tensor<T>*>> params() {
    std::vector<std::tuple<std::string, Tensor<T>*, Tensor<T>*>> out;
    std::int64_t conv_ord = 0, dense_ord = 0;
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
      if (cfg_.layers[i].kind == LayerKind::kConv) {
        ConvSlot& s = convs_[slot_[i]];
        const std::string base = "conv" + std::to_string(++conv_ord);
        out.emplace_back(base + ".kernels", &s.p.kernels, &s.grad_kernels);
        out.emplace_back(base + ".bias", &s.p.bias, &s.grad_bias);
      } else if (cfg_.layers[i].kind == LayerKind::kDense) {
        DenseSlot& s = denses_[slot_[i]];
        const std::string base = "dense" + std::to_string(++dense_ord);
        out.emplace_back(base + ".weights", &s.p.weights, &s.grad_weights);
        out.emplace_back(base + ".bias", &s.p.bias, &s.grad_bias);
      }
    }
    return out;
  }

  void zero_grads() {
    for (auto& s : convs_) {
      std::fill(s.grad_kernels.data().begin(), s.grad_kernels.data().end(), T{0});
      std::fill(s.grad_bias.data().begin(), s.grad_bias.data().end(), T{0});
    }
    for (auto& s : denses_) {
      std::fill(s.grad_weights.data().begin(), s.grad_weights.data().end(), T{0});
      std::fill(s.grad_bias.data().begin(), s.grad_bias.data().end(), T{0});
    }
  }

  void sgd(T lr) {
    for (auto& [name, value, grad] : params()) sgd_step(*value, *grad, lr);
  }

  void save(const std::string& path) {
    ParamView<T> view;
    for (auto& [name, value, grad] : params()) view.emplace_back(name, value);
    save_checkpoint(path, view);
  }

  void load(const std::string& path) {
    ParamRefs<T> refs;
    for (auto& [name, value, grad] : params()) refs.emplace_back(name, value);
    load_checkpoint(path, refs);
  }

  /// Index of the layer whose *input* serves as the learned feature vector
  /// (the first dense layer); the network output if there is none.
  std::size_t feature_layer() const {
    for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
      if (cfg_.layers[i].kind == LayerKind::kDense) return i;
    }
    return cfg_.layers.size();
  }

  const Tensor<T>& features(const Trace<T>& trace) const {
    return trace.acts[feature_layer()];
  }

 private:
  struct ConvSlot {
    ConvParams<T> p;
    Tensor<T> grad_kernels;
    Tensor<T> grad_bias;
  };
  struct DenseSlot {
    DenseParams<T> p;
    Tensor<T> grad_weights;
    Tensor<T> grad_bias;
  };

  static void accumulate(Tensor<T>& into, const Tensor<T>& add) {
    for (std::size_t j = 0; j < into.data().size(); ++j) into.data()[j] += add.data()[j];
  }

  NetworkConfig cfg_;
  ShapeWalk walk_;
  std::vector<std::int64_t> slot_;
  std::vector<ConvSlot> convs_;
  std::vector<DenseSlot> denses_;
};

/// Classic small convnet on 28x28 grayscale: two 5x5 conv + pool stages and
/// three dense layers.
inline NetworkConfig lenet5_config() {
  NetworkConfig cfg;
  cfg.in_h = 28;
  cfg.in_w = 28;
  cfg.in_c = 1;
  cfg.classes = 10;
  cfg.precision = 32;
  cfg.layers = {
      LayerSpec::conv(5, 6, 1),  LayerSpec::relu(), LayerSpec::maxpool(),
      LayerSpec::conv(5, 16, 1), LayerSpec::relu(), LayerSpec::maxpool(),
      LayerSpec::flatten(),      LayerSpec::dense(120), LayerSpec::relu(),
      LayerSpec::dense(84),      LayerSpec::relu(),     LayerSpec::dense(10),
  };
  return cfg;
}

/// The same network with rotation canonicalization ahead of each conv and a
/// whole-map canonicalization before the classifier head, which makes the
/// logits exactly invariant to quarter-turn rotations of the input.
inline NetworkConfig lenet5_rrl_config(LbpMode mode = LbpMode::kQuarter4,
                                       ChannelPolicy policy = ChannelPolicy::kIndependent) {
  NetworkConfig cfg;
  cfg.in_h = 28;
  cfg.in_w = 28;
  cfg.in_c = 1;
  cfg.classes = 10;
  cfg.precision = 32;
  cfg.layers = {
      LayerSpec::rrl(mode, policy), LayerSpec::conv(5, 6, 5),  LayerSpec::relu(),
      LayerSpec::maxpool(),         LayerSpec::rrl(mode, policy),
      LayerSpec::conv(5, 16, 5),    LayerSpec::relu(),         LayerSpec::maxpool(),
      LayerSpec::global_rrl(),      LayerSpec::flatten(),      LayerSpec::dense(120),
      LayerSpec::relu(),            LayerSpec::dense(84),      LayerSpec::relu(),
      LayerSpec::dense(10),
  };
  return cfg;
}

/// Returns the built-in architecture for a preset name, or throws.
inline NetworkConfig preset_config(const std::string& name) {
  if (name == "lenet5") return lenet5_config();
  if (name == "lenet5-rrl") return lenet5_rrl_config();
  throw config_error("unknown model preset '" + name + "' (available: lenet5, lenet5-rrl)");
}

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline std::int64_t parse_int_field(const std::string& tok, int line_no, const char* what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(line_no) + ": " + what + " must be an integer, got '" +
                       tok + "'");
  }
}

[[noreturn]] inline void line_error(int line_no, const std::string& msg) {
  throw config_error("line " + std::to_string(line_no) + ": " + msg);
}

}  // namespace detail

/// Parses the plain-text network description. The format is line oriented:
///   input <h> <w> <c>
///   classes <k>
///   precision <32|64>
///   layer <kind> [args...]
/// Blank lines and lines starting with '#' are ignored. Layer kinds:
///   rrl <ring8|quarter4> [independent|shared]
///   conv <window> <out_channels> <stride>
///   maxpool | avgpool | relu | globalrrl | flatten | softmax
///   dense <out_features>
inline NetworkConfig parse_config(const std::string& text) {
  NetworkConfig cfg;
  bool saw_input = false, saw_classes = false, saw_precision = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto toks = detail::split_tokens(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    const std::string& key = toks[0];
    if (key == "input") {
      if (saw_input) detail::line_error(line_no, "duplicate 'input'");
      if (toks.size() != 4) detail::line_error(line_no, "'input' needs <h> <w> <c>");
      cfg.in_h = detail::parse_int_field(toks[1], line_no, "input height");
      cfg.in_w = detail::parse_int_field(toks[2], line_no, "input width");
      cfg.in_c = detail::parse_int_field(toks[3], line_no, "input channels");
      saw_input = true;
    } else if (key == "classes") {
      if (saw_classes) detail::line_error(line_no, "duplicate 'classes'");
      if (toks.size() != 2) detail::line_error(line_no, "'classes' needs one integer");
      cfg.classes = detail::parse_int_field(toks[1], line_no, "class count");
      saw_classes = true;
    } else if (key == "precision") {
      if (saw_precision) detail::line_error(line_no, "duplicate 'precision'");
      if (toks.size() != 2) detail::line_error(line_no, "'precision' needs 32 or 64");
      const std::int64_t p = detail::parse_int_field(toks[1], line_no, "precision");
      if (p != 32 && p != 64) detail::line_error(line_no, "precision must be 32 or 64");
      cfg.precision = static_cast<int>(p);
      saw_precision = true;
    } else if (key == "layer") {
      if (toks.size() < 2) detail::line_error(line_no, "'layer' needs a kind");
      const std::string& kind = toks[1];
      if (kind == "rrl") {
        if (toks.size() < 3 || toks.size() > 4) {
          detail::line_error(line_no, "'layer rrl' needs <ring8|quarter4> [independent|shared]");
        }
        LbpMode mode = LbpMode::kQuarter4;
        if (toks[2] == "ring8") {
          mode = LbpMode::kRing8;
        } else if (toks[2] == "quarter4") {
          mode = LbpMode::kQuarter4;
        } else {
          detail::line_error(line_no, "rrl mode must be 'ring8' or 'quarter4', got '" + toks[2] + "'");
        }
        ChannelPolicy policy = ChannelPolicy::kIndependent;
        if (toks.size() == 4) {
          if (toks[3] == "independent") {
            policy = ChannelPolicy::kIndependent;
          } else if (toks[3] == "shared") {
            policy = ChannelPolicy::kShared;
          } else {
            detail::line_error(line_no,
                               "rrl policy must be 'independent' or 'shared', got '" + toks[3] + "'");
          }
        }
        cfg.layers.push_back(LayerSpec::rrl(mode, policy));
      } else if (kind == "conv") {
        if (toks.size() != 5) {
          detail::line_error(line_no, "'layer conv' needs <window> <out_channels> <stride>");
        }
        cfg.layers.push_back(LayerSpec::conv(detail::parse_int_field(toks[2], line_no, "conv window"),
                                             detail::parse_int_field(toks[3], line_no, "conv channels"),
                                             detail::parse_int_field(toks[4], line_no, "conv stride")));
      } else if (kind == "dense") {
        if (toks.size() != 3) detail::line_error(line_no, "'layer dense' needs <out_features>");
        cfg.layers.push_back(
            LayerSpec::dense(detail::parse_int_field(toks[2], line_no, "dense output size")));
      } else if (kind == "maxpool" || kind == "avgpool" || kind == "relu" || kind == "globalrrl" ||
                 kind == "flatten" || kind == "softmax") {
        if (toks.size() != 2) detail::line_error(line_no, "'layer " + kind + "' takes no arguments");
        if (kind == "maxpool") cfg.layers.push_back(LayerSpec::maxpool());
        else if (kind == "avgpool") cfg.layers.push_back(LayerSpec::avgpool());
        else if (kind == "relu") cfg.layers.push_back(LayerSpec::relu());
        else if (kind == "globalrrl") cfg.layers.push_back(LayerSpec::global_rrl());
        else if (kind == "flatten") cfg.layers.push_back(LayerSpec::flatten());
        else cfg.layers.push_back(LayerSpec::softmax());
      } else {
        detail::line_error(line_no, "unknown layer kind '" + kind + "'");
      }
    } else {
      detail::line_error(line_no, "unknown directive '" + key + "'");
    }
  }
  if (!saw_input) throw config_error("config is missing the 'input' line");
  if (!saw_classes) throw config_error("config is missing the 'classes' line");
  validate_config(cfg);
  return cfg;
}

inline NetworkConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw io_error("failed reading config '" + path + "'");
  try {
    return parse_config(buf.str());
  } catch (const config_error& e) {
    throw config_error(path + ": " + e.what());
  }
}

}  // namespace rrl
