#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rrl/data.hpp"
#include "rrl/lbp.hpp"
#include "rrl/models.hpp"
#include "rrl/nn.hpp"
#include "rrl/rng.hpp"
#include "rrl/rrl.hpp"
#include "rrl/tensor.hpp"

namespace rrl {

/// Outcome of one verification suite. `worst` is the largest deviation seen
/// across all trials; a trial fails when its deviation exceeds `tolerance`.
struct Report {
  std::string name;
  std::int64_t trials = 0;
  std::int64_t failures = 0;
  double worst = 0.0;
  double tolerance = 0.0;

  bool passed() const { return failures == 0; }

  std::string summary() const {
    std::ostringstream out;
    out << name << ": trials=" << trials << " failures=" << failures << " worst="
        << std::scientific << std::setprecision(3) << worst << " tol=" << tolerance << " -> "
        << (passed() ? "PASS" : "FAIL");
    return out.str();
  }
};

namespace detail {

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) -
                                     static_cast<double>(b.data()[i])));
  }
  return worst;
}

/// Random window generators, cycled per trial. The later kinds deliberately
/// construct the inputs where naive canonicalization breaks: exact threshold
/// ties, multi-valued plateaus, and windows whose four quarter turns are
/// bit-identical (forcing the final index tie-break).
template <typename T>
Tensor<T> make_window(Rng& rng, std::int64_t f, std::int64_t c, int kind) {
  Tensor<T> w(1, f, f, c);
  switch (kind % 6) {
    case 0:  // smooth random values
      for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
      break;
    case 1:  // binary
      for (auto& v : w.data()) v = static_cast<T>(rng.uniform_index(2));
      break;
    case 2:  // three-level plateaus
      for (auto& v : w.data()) v = static_cast<T>(rng.uniform_index(3)) / T{2};
      break;
    case 3:  // constant
      w = Tensor<T>::full(1, f, f, c, static_cast<T>(rng.uniform(-1.0, 1.0)));
      break;
    case 4: {  // random values with planted neighbor == center ties
      for (auto& v : w.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const T center = w(0, f / 2, f / 2, ch);
        for (const auto& [dh, dw] : kRingOffsets) {
          if (rng.uniform_index(2) == 0) w(0, f / 2 + dh, f / 2 + dw, ch) = center;
        }
      }
      break;
    }
    case 5: {  // exactly quarter-turn-symmetric content
      const std::uint64_t base = rng.next_u64();
      for (std::int64_t h = 0; h < f; ++h) {
        for (std::int64_t w2 = 0; w2 < f; ++w2) {
          // Walk the 4-orbit of (h, w2) under (h, w) -> (f-1-w, h) and key the
          // value off the lexicographically least member, so all members of an
          // orbit share one value and rot90 of the window reproduces it.
          std::int64_t oh = h, ow = w2, bh = h, bw = w2;
          for (int r = 0; r < 3; ++r) {
            const std::int64_t nh = f - 1 - ow, nw = oh;
            oh = nh;
            ow = nw;
            if (nh < bh || (nh == bh && nw < bw)) {
              bh = nh;
              bw = nw;
            }
          }
          for (std::int64_t ch = 0; ch < c; ++ch) {
            const std::uint64_t bits =
                Rng::splitmix(base + static_cast<std::uint64_t>((bh * f + bw) * 16 + ch));
            w(0, h, w2, ch) = static_cast<T>((bits >> 11) * 0x1.0p-53);
          }
        }
      }
      break;
    }
  }
  return w;
}

}  // namespace detail

/// Canonicalization must assign the same canonical window to all quarter
/// turns of every window: canon(rot90(w, n)) == canon(w) element-exactly.
template <typename T = double>
Report verify_window_invariance(std::int64_t trials, std::int64_t f, LbpMode mode,
                                ChannelPolicy policy, std::uint64_t seed) {
  Report report;
  {
    std::ostringstream name;
    name << "window-invariance f=" << f << " mode=" << (mode == LbpMode::kRing8 ? "ring8" : "quarter4")
         << " policy=" << (policy == ChannelPolicy::kIndependent ? "independent" : "shared");
    report.name = name.str();
  }
  report.trials = trials;
  report.tolerance = 0.0;
  Rng rng(seed);
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::int64_t c = 1 + t % 3;
    const Tensor<T> w = detail::make_window<T>(rng, f, c, static_cast<int>(t % 6));
    const CanonicalWindow<T> base = canonical_rotation(w, mode, policy);
    double worst = 0.0;
    for (int n = 1; n < 4; ++n) {
      const CanonicalWindow<T> turned = canonical_rotation(rot90(w, n), mode, policy);
      worst = std::max(worst, detail::max_abs_diff(base.window, turned.window));
    }
    report.worst = std::max(report.worst, worst);
    if (worst > report.tolerance) ++report.failures;
  }
  return report;
}

/// The canonicalize-then-convolve composition must be exactly equivariant:
/// applying it to a quarter-turned input yields the quarter-turned output.
template <typename T = double>
Report verify_layer_equivariance(std::int64_t trials, std::int64_t f, LbpMode mode,
                                 ChannelPolicy policy, std::uint64_t seed,
                                 double tolerance = 1e-12) {
  Report report;
  {
    std::ostringstream name;
    name << "layer-equivariance f=" << f << " mode=" << (mode == LbpMode::kRing8 ? "ring8" : "quarter4")
         << " policy=" << (policy == ChannelPolicy::kIndependent ? "independent" : "shared");
    report.name = name.str();
  }
  report.trials = trials;
  report.tolerance = tolerance;
  Rng rng(seed);
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::int64_t c_in = 1 + t % 2 * 2;           // 1 or 3
    const std::int64_t c_out = 2 + t % 3;              // 2..4
    const std::int64_t oh = 2 + t % 3;                 // window count per axis
    const std::int64_t h = f + oh - 1;
    Tensor<T> x(1, h, h, c_in);
    for (auto& v : x.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    ConvParams<T> conv = make_conv<T>(f, c_in, c_out, f, rng);
    const WindowGrid grid(h, h, f);

    const auto [tiled, record] = rrl_forward(x, grid, mode, policy);
    const Tensor<T> base = conv_forward(tiled, conv);
    double worst = 0.0;
    for (int n = 1; n < 4; ++n) {
      const auto [tiled_n, record_n] = rrl_forward(rot90(x, n), grid, mode, policy);
      const Tensor<T> out_n = conv_forward(tiled_n, conv);
      worst = std::max(worst, detail::max_abs_diff(rot90(out_n, (4 - n) % 4), base));
    }
    report.worst = std::max(report.worst, worst);
    if (worst > tolerance) ++report.failures;
  }
  return report;
}

/// Sensitivity check for the suite above: with canonicalization replaced by a
/// plain window-tiling identity, equivariance must break on random inputs. A
/// trial fails if the deviation stays small (the harness would be blind).
template <typename T = double>
Report verify_identity_layer_not_equivariant(std::int64_t trials, std::int64_t f,
                                             std::uint64_t seed, double margin = 1e-6) {
  Report report;
  report.name = "identity-tiling breaks equivariance f=" + std::to_string(f);
  report.trials = trials;
  report.tolerance = margin;
  report.worst = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  double least = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::int64_t c_in = 1 + t % 2 * 2;
    const std::int64_t c_out = 2 + t % 3;
    const std::int64_t oh = 2 + t % 3;
    const std::int64_t h = f + oh - 1;
    Tensor<T> x(1, h, h, c_in);
    for (auto& v : x.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    ConvParams<T> conv = make_conv<T>(f, c_in, c_out, f, rng);
    const WindowGrid grid(h, h, f);

    const Tensor<T> base = conv_forward(assemble_windows(extract_windows(x, grid), grid), conv);
    double dev = 0.0;
    for (int n = 1; n < 4; ++n) {
      const Tensor<T> out_n =
          conv_forward(assemble_windows(extract_windows(rot90(x, n), grid), grid), conv);
      dev = std::max(dev, detail::max_abs_diff(rot90(out_n, (4 - n) % 4), base));
    }
    least = std::min(least, dev);
    if (dev <= margin) ++report.failures;  // failed to break: harness is blind
  }
  report.worst = least;  // smallest observed deviation; must exceed the margin
  return report;
}

/// Calibration of the rotation utilities themselves: for plain convolution,
/// convolving a quarter-turned input with quarter-turned kernels equals the
/// quarter-turned convolution of the originals (up to summation-order
/// rounding, hence the 64-bit tolerance).
template <typename T = double>
Report verify_conv_rotation_identity(std::int64_t trials, std::uint64_t seed,
                                     double tolerance = 1e-12) {
  Report report;
  report.name = "conv rotation identity";
  report.trials = trials;
  report.tolerance = tolerance;
  Rng rng(seed);
  for (std::int64_t t = 0; t < trials; ++t) {
    const std::int64_t f = 3 + (t % 2) * 2;
    const std::int64_t c_in = 1 + t % 3;
    const std::int64_t c_out = 2 + t % 2;
    const std::int64_t h = f + 3 + t % 4;
    Tensor<T> x(1, h, h, c_in);
    for (auto& v : x.data()) v = static_cast<T>(rng.uniform(-1.0, 1.0));
    ConvParams<T> conv = make_conv<T>(f, c_in, c_out, 1, rng);
    const Tensor<T> base = conv_forward(x, conv);
    double worst = 0.0;
    for (int n = 1; n < 4; ++n) {
      ConvParams<T> turned = conv;
      turned.kernels = rot90(conv.kernels, n);  // spatially rotates every kernel
      const Tensor<T> out_n = conv_forward(rot90(x, n), turned);
      worst = std::max(worst, detail::max_abs_diff(out_n, rot90(base, n)));
    }
    report.worst = std::max(report.worst, worst);
    if (worst > tolerance) ++report.failures;
  }
  return report;
}

/// Logits of a rotation-canonicalizing network must be identical for all four
/// quarter turns of any input.
template <typename T>
Report verify_model_invariance(const NetworkConfig& cfg, std::int64_t trials, std::uint64_t seed,
                               double tolerance, const std::string& label) {
  Report report;
  report.name = label;
  report.trials = trials;
  report.tolerance = tolerance;
  Network<T> net(cfg, seed);
  Rng rng(Rng::splitmix(seed + 0x9e3779b97f4a7c15ull));
  for (std::int64_t t = 0; t < trials; ++t) {
    Tensor<T> x(1, cfg.in_h, cfg.in_w, cfg.in_c);
    for (auto& v : x.data()) v = static_cast<T>(rng.uniform(0.0, 1.0));
    const Tensor<T> base = net.forward(x).output();
    double worst = 0.0;
    for (int n = 1; n < 4; ++n) {
      worst = std::max(worst, detail::max_abs_diff(net.forward(rot90(x, n)).output(), base));
    }
    report.worst = std::max(report.worst, worst);
    if (worst > tolerance) ++report.failures;
  }
  return report;
}

/// As above but for architectures that are *not* invariant: a trial fails if
/// the quarter-turned logits stay within `margin` (nothing to detect).
template <typename T>
Report verify_model_not_invariant(const NetworkConfig& cfg, std::int64_t trials,
                                  std::uint64_t seed, double margin, const std::string& label) {
  Report report;
  report.name = label;
  report.trials = trials;
  report.tolerance = margin;
  Network<T> net(cfg, seed);
  Rng rng(Rng::splitmix(seed + 0x9e3779b97f4a7c15ull));
  double least = std::numeric_limits<double>::infinity();
  for (std::int64_t t = 0; t < trials; ++t) {
    Tensor<T> x(1, cfg.in_h, cfg.in_w, cfg.in_c);
    for (auto& v : x.data()) v = static_cast<T>(rng.uniform(0.0, 1.0));
    const Tensor<T> base = net.forward(x).output();
    double dev = 0.0;
    for (int n = 1; n < 4; ++n) {
      dev = std::max(dev, detail::max_abs_diff(net.forward(rot90(x, n)).output(), base));
    }
    least = std::min(least, dev);
    if (dev <= margin) ++report.failures;
  }
  report.worst = least;
  return report;
}

/// Drops the whole-map canonicalization layers; the result stays shape-valid
/// and is equivariant but no longer invariant.
inline NetworkConfig strip_global_rrl(NetworkConfig cfg) {
  std::vector<LayerSpec> kept;
  for (const auto& l : cfg.layers) {
    if (l.kind != LayerKind::kGlobalRrl) kept.push_back(l);
  }
  cfg.layers = std::move(kept);
  validate_config(cfg);
  return cfg;
}

/// Drops every canonicalization layer and relaxes the tile-consuming convs
/// back to stride 1, recovering the plain baseline architecture.
inline NetworkConfig strip_all_rrl(NetworkConfig cfg) {
  std::vector<LayerSpec> kept;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const LayerSpec& l = cfg.layers[i];
    if (l.kind == LayerKind::kRrl || l.kind == LayerKind::kGlobalRrl) continue;
    LayerSpec copy = l;
    if (l.kind == LayerKind::kConv && i > 0 && cfg.layers[i - 1].kind == LayerKind::kRrl) {
      copy.stride = 1;
    }
    kept.push_back(copy);
  }
  cfg.layers = std::move(kept);
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Training and evaluation
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::int64_t epochs = 5;
  double lr = 0.05;
  std::int64_t batch = 32;
  std::uint64_t seed = 1;
};

struct EpochLog {
  std::int64_t epoch = 0;
  double mean_loss = 0.0;
};

/// Minibatch SGD with per-epoch Fisher-Yates shuffling; fully deterministic
/// under a fixed seed (summation orders are fixed everywhere downstream).
template <typename T>
std::vector<EpochLog> train_network(Network<T>& net, const Dataset<T>& train,
                                    const TrainConfig& cfg, std::ostream* log = nullptr) {
  if (train.size() == 0) throw std::invalid_argument("train_network: empty dataset");
  if (cfg.batch < 1 || cfg.epochs < 1) {
    throw std::invalid_argument("train_network: epochs and batch must be positive");
  }
  Rng rng(cfg.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
  std::vector<EpochLog> logs;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t start = 0; start < train.size(); start += cfg.batch) {
      const std::int64_t stop = std::min(train.size(), start + cfg.batch);
      const std::vector<std::int64_t> idx(order.begin() + start, order.begin() + stop);
      const Tensor<T> x = stack_images(train, idx);
      const std::vector<int> y = gather_labels(train, idx);
      const Trace<T> trace = net.forward(x);
      auto [loss, grad] = softmax_cross_entropy(trace.output(), y);
      net.zero_grads();
      net.backward(trace, grad);
      net.sgd(static_cast<T>(cfg.lr));
      loss_sum += static_cast<double>(loss);
      ++batches;
    }
    EpochLog entry{epoch + 1, loss_sum / static_cast<double>(batches)};
    logs.push_back(entry);
    if (log) {
      *log << "epoch " << entry.epoch << "/" << cfg.epochs << " mean-loss " << std::fixed
           << std::setprecision(6) << entry.mean_loss << "\n";
    }
  }
  return logs;
}

struct EvalResult {
  double accuracy = 0.0;
  std::vector<int> predictions;
};

template <typename T>
int argmax_channel(const Tensor<T>& logits, std::int64_t n) {
  int best = 0;
  for (std::int64_t k = 1; k < logits.channels(); ++k) {
    if (logits(n, 0, 0, k) > logits(n, 0, 0, best)) best = static_cast<int>(k);
  }
  return best;
}

template <typename T>
EvalResult evaluate(const Network<T>& net, const Dataset<T>& test, std::int64_t batch = 64) {
  EvalResult result;
  result.predictions.reserve(static_cast<std::size_t>(test.size()));
  std::int64_t correct = 0;
  for (std::int64_t start = 0; start < test.size(); start += batch) {
    const std::int64_t stop = std::min(test.size(), start + batch);
    std::vector<std::int64_t> idx;
    for (std::int64_t i = start; i < stop; ++i) idx.push_back(i);
    const Tensor<T> x = stack_images(test, idx);
    const Tensor<T> logits = net.forward(x).output();
    for (std::int64_t n = 0; n < stop - start; ++n) {
      const int pred = argmax_channel(logits, n);
      result.predictions.push_back(pred);
      if (pred == test.labels[static_cast<std::size_t>(start + n)]) ++correct;
    }
  }
  result.accuracy = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size())
                                : 0.0;
  return result;
}

// ---------------------------------------------------------------------------
// Angle sweep
// ---------------------------------------------------------------------------

/// Relative feature distance ||a - ref|| / ||ref||, with an epsilon floor on
/// the reference norm.
template <typename T>
double normalized_feature_distance(const Tensor<T>& a, const Tensor<T>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(ref.data()[i]);
    num += d * d;
    den += static_cast<double>(ref.data()[i]) * static_cast<double>(ref.data()[i]);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

struct SweepResult {
  std::vector<double> angles;
  std::vector<double> agreement;                // fraction of images keeping their upright label
  std::vector<double> mean_distance;            // mean over images, per angle
  std::vector<std::vector<double>> distance;    // [angle][image]
};

/// Rotates every image through {0, step, 2*step, ...} degrees (bilinear,
/// masked) and reports, per angle, agreement with the upright prediction and
/// the mean relative distance of the pre-classifier features.
template <typename T>
SweepResult sweep_angles(const Network<T>& net, const Dataset<T>& ds, std::int64_t step_degrees,
                         std::int64_t max_images) {
  if (step_degrees < 1 || step_degrees >= 360) {
    throw std::invalid_argument("sweep_angles: step must be in [1, 359]");
  }
  const std::int64_t count = std::min<std::int64_t>(max_images, ds.size());
  if (count == 0) throw std::invalid_argument("sweep_angles: empty dataset");
  SweepResult result;

  std::vector<Tensor<T>> bases;
  std::vector<int> base_pred;
  std::vector<Tensor<T>> base_feat;
  for (std::int64_t i = 0; i < count; ++i) {
    bases.push_back(inscribed_circle_mask(ds.images[static_cast<std::size_t>(i)], T{0}));
    const Trace<T> trace = net.forward(bases.back());
    base_pred.push_back(argmax_channel(trace.output(), 0));
    base_feat.push_back(net.features(trace));
  }

  for (std::int64_t angle = 0; angle < 360; angle += step_degrees) {
    std::int64_t agree = 0;
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
      const Tensor<T> turned = inscribed_circle_mask(
          rotate_bilinear(bases[static_cast<std::size_t>(i)], static_cast<double>(angle), T{0}),
          T{0});
      const Trace<T> trace = net.forward(turned);
      if (argmax_channel(trace.output(), 0) == base_pred[static_cast<std::size_t>(i)]) ++agree;
      dist.push_back(
          normalized_feature_distance(net.features(trace), base_feat[static_cast<std::size_t>(i)]));
    }
    double mean = 0.0;
    for (const double d : dist) mean += d;
    mean /= static_cast<double>(count);
    result.angles.push_back(static_cast<double>(angle));
    result.agreement.push_back(static_cast<double>(agree) / static_cast<double>(count));
    result.mean_distance.push_back(mean);
    result.distance.push_back(std::move(dist));
  }
  return result;
}

/// CSV rendering of a sweep. The feature distance is the L2 distance of the
/// flattened pre-classifier features, divided by the upright feature norm.
inline std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << "# feature_distance = ||f(rotated) - f(upright)||_2 / ||f(upright)||_2 at the "
         "pre-classifier layer\n";
  out << "angle_degrees,agreement,mean_feature_distance\n";
  for (std::size_t i = 0; i < sweep.angles.size(); ++i) {
    out << std::fixed << std::setprecision(1) << sweep.angles[i] << ','
        << std::setprecision(6) << sweep.agreement[i] << ',' << std::scientific
        << std::setprecision(6) << sweep.mean_distance[i] << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Trend experiment
// ---------------------------------------------------------------------------

struct TrendEntry {
  std::string model;
  double upright = 0.0;
  double rot = 0.0;
  double rotplus = 0.0;
  std::vector<int> upright_predictions;
  std::vector<int> rot_predictions;
};

struct TrendOutcome {
  std::vector<TrendEntry> entries;
  std::string markdown;
  std::string csv;
};

/// Trains each architecture on the upright (masked) training set and scores
/// it on the upright, quarter-turned (rot) and arbitrary-angle (rot+) test
/// sets. Mirrors the first two data columns of the reference comparison.
template <typename T>
TrendOutcome trend_experiment(const std::vector<std::pair<std::string, NetworkConfig>>& models,
                              const Dataset<T>& train_raw, const Dataset<T>& test_raw,
                              const TrainConfig& train_cfg, std::uint64_t rot_seed,
                              std::ostream* log = nullptr) {
  const Dataset<T> train = mask_dataset(train_raw);
  const Dataset<T> upright = mask_dataset(test_raw);
  const Dataset<T> rot = make_rot_testset(test_raw, rot_seed);
  const Dataset<T> rotplus = make_rotplus_testset(test_raw, Rng::splitmix(rot_seed));

  TrendOutcome outcome;
  for (const auto& [name, cfg] : models) {
    if (log) *log << "training " << name << "\n";
    Network<T> net(cfg, train_cfg.seed);
    train_network(net, train, train_cfg, log);
    TrendEntry entry;
    entry.model = name;
    EvalResult up = evaluate(net, upright);
    EvalResult ro = evaluate(net, rot);
    EvalResult rp = evaluate(net, rotplus);
    entry.upright = up.accuracy;
    entry.rot = ro.accuracy;
    entry.rotplus = rp.accuracy;
    entry.upright_predictions = std::move(up.predictions);
    entry.rot_predictions = std::move(ro.predictions);
    outcome.entries.push_back(std::move(entry));
  }

  std::ostringstream md, csv;
  md << "| model | upright | rot | rot+ |\n|---|---|---|---|\n";
  csv << "model,upright,rot,rotplus\n";
  for (const auto& e : outcome.entries) {
    md << "| " << e.model << " | " << std::fixed << std::setprecision(4) << e.upright << " | "
       << e.rot << " | " << e.rotplus << " |\n";
    csv << e.model << ',' << std::fixed << std::setprecision(4) << e.upright << ',' << e.rot
        << ',' << e.rotplus << '\n';
  }
  outcome.markdown = md.str();
  outcome.csv = csv.str();
  return outcome;
}

// ---------------------------------------------------------------------------
// Finite-difference utilities
// ---------------------------------------------------------------------------

/// Central difference of `loss` with respect to one tensor entry, evaluated
/// at two step sizes. Coordinates where the two estimates disagree sit on a
/// kink (relu corner, pooling argmax flip, canonicalization tie) and should
/// be skipped rather than compared.
template <typename T, typename LossFn>
std::pair<double, double> central_difference(Tensor<T>& t, std::size_t flat_index, T step,
                                             LossFn&& loss) {
  const T saved = t.data()[flat_index];
  const auto probe = [&](T h) {
    t.data()[flat_index] = saved + h;
    const double up = static_cast<double>(loss());
    t.data()[flat_index] = saved - h;
    const double down = static_cast<double>(loss());
    t.data()[flat_index] = saved;
    return (up - down) / (2.0 * static_cast<double>(h));
  };
  const double d1 = probe(step);
  const double d2 = probe(step / T{2});
  return {d1, d2};
}

inline double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

// ---------------------------------------------------------------------------
// Dataset directory layout
// ---------------------------------------------------------------------------

inline std::string train_images_name() { return "train-images.idx3-ubyte"; }
inline std::string train_labels_name() { return "train-labels.idx1-ubyte"; }
inline std::string test_images_name() { return "t10k-images.idx3-ubyte"; }
inline std::string test_labels_name() { return "t10k-labels.idx1-ubyte"; }

/// Loads the training or test split from a directory holding the four
/// standard container files.
template <typename T>
Dataset<T> load_split(const std::string& dir, bool train) {
  const std::string images = dir + "/" + (train ? train_images_name() : test_images_name());
  const std::string labels = dir + "/" + (train ? train_labels_name() : test_labels_name());
  return load_idx<T>(images, labels);
}

}  // namespace rrl
