// Command-line front end: training, evaluation, verification suites, angle
// sweeps, feature dumps, and box-list transforms. Exit codes: 0 success,
// 1 verification/assertion failure, 2 usage or config error, 3 I/O error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rrl/all.hpp"

namespace {

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::int64_t epochs = 5;
  double lr = 0.05;
  std::int64_t batch = 32;
  std::uint64_t seed = 1;
  int precision = 0;  // 0 = take from config
};

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::string rotate = "none";
  std::uint64_t seed = 1;
  std::string csv_path;  // empty = CSV to stdout
};

struct VerifyArgs {
  std::string suite = "all";
  std::int64_t trials = 1000;
  std::uint64_t seed = 1;
  std::string config;  // optional; model suite default is the built-in invariant preset
};

struct SweepArgs {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::int64_t step_degrees = 12;
  std::int64_t limit = 100;
  std::string out;  // empty = stdout
};

struct DumpArgs {
  std::string config;
  std::string checkpoint;
  std::string image;
  std::int64_t layer = 0;
  std::string out;
};

struct BoxArgs {
  std::string boxes;
  int n = 0;
  std::int64_t width = 0;
  std::int64_t height = 0;
};

template <typename T>
int run_train(const TrainArgs& args, const rrl::NetworkConfig& cfg) {
  const rrl::Dataset<T> train_raw = rrl::load_split<T>(args.data, /*train=*/true);
  const rrl::Dataset<T> train = rrl::mask_dataset(train_raw);
  rrl::Network<T> net(cfg, args.seed);
  rrl::TrainConfig tc;
  tc.epochs = args.epochs;
  tc.lr = args.lr;
  tc.batch = args.batch;
  tc.seed = args.seed;
  rrl::train_network(net, train, tc, &std::cout);
  net.save(args.out);
  std::cout << "saved checkpoint " << args.out << "\n";
  return 0;
}

template <typename T>
int run_eval(const EvalArgs& args, const rrl::NetworkConfig& cfg) {
  rrl::Network<T> net(cfg, /*seed=*/1);
  net.load(args.checkpoint);
  const rrl::Dataset<T> test_raw = rrl::load_split<T>(args.data, /*train=*/false);
  rrl::Dataset<T> test;
  if (args.rotate == "none") {
    test = rrl::mask_dataset(test_raw);
  } else if (args.rotate == "rot") {
    test = rrl::make_rot_testset(test_raw, args.seed);
  } else if (args.rotate == "rot+") {
    test = rrl::make_rotplus_testset(test_raw, args.seed);
  } else {
    throw rrl::config_error("--rotate must be none, rot or rot+");
  }
  const rrl::EvalResult result = rrl::evaluate(net, test);
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < result.predictions.size(); ++i) {
    if (result.predictions[i] == test.labels[i]) ++correct;
  }
  std::cout << "accuracy " << std::fixed << std::setprecision(4) << result.accuracy << " ("
            << correct << "/" << test.size() << ") rotate=" << args.rotate << "\n";
  std::ostringstream csv;
  csv << "index,label,prediction,correct\n";
  for (std::size_t i = 0; i < result.predictions.size(); ++i) {
    csv << i << ',' << test.labels[i] << ',' << result.predictions[i] << ','
        << (result.predictions[i] == test.labels[i] ? 1 : 0) << '\n';
  }
  if (args.csv_path.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream out(args.csv_path, std::ios::trunc);
    if (!out) throw rrl::io_error("cannot open '" + args.csv_path + "' for writing");
    out << csv.str();
    if (!out.flush()) throw rrl::io_error("failed writing '" + args.csv_path + "'");
    std::cout << "wrote " << args.csv_path << "\n";
  }
  return 0;
}

void run_window_suite(const VerifyArgs& args, std::vector<rrl::Report>& reports) {
  using rrl::ChannelPolicy;
  using rrl::LbpMode;
  const std::pair<std::int64_t, LbpMode> combos[] = {
      {3, LbpMode::kRing8}, {3, LbpMode::kQuarter4}, {5, LbpMode::kQuarter4}};
  std::uint64_t seed = args.seed;
  for (const auto& [f, mode] : combos) {
    for (const ChannelPolicy policy : {ChannelPolicy::kIndependent, ChannelPolicy::kShared}) {
      reports.push_back(
          rrl::verify_window_invariance<double>(args.trials, f, mode, policy, seed++));
    }
  }
}

void run_layer_suite(const VerifyArgs& args, std::vector<rrl::Report>& reports) {
  using rrl::ChannelPolicy;
  using rrl::LbpMode;
  const std::pair<std::int64_t, LbpMode> combos[] = {
      {3, LbpMode::kRing8}, {3, LbpMode::kQuarter4}, {5, LbpMode::kQuarter4}};
  std::uint64_t seed = args.seed + 100;
  for (const auto& [f, mode] : combos) {
    for (const ChannelPolicy policy : {ChannelPolicy::kIndependent, ChannelPolicy::kShared}) {
      reports.push_back(
          rrl::verify_layer_equivariance<double>(args.trials, f, mode, policy, seed++));
    }
  }
  reports.push_back(rrl::verify_identity_layer_not_equivariant<double>(
      std::max<std::int64_t>(1, args.trials / 10), 3, seed++));
  reports.push_back(rrl::verify_conv_rotation_identity<double>(args.trials, seed++));
}

template <typename T>
void run_model_suite(const VerifyArgs& args, const rrl::NetworkConfig& cfg, double tolerance,
                     std::vector<rrl::Report>& reports) {
  const std::int64_t trials = std::max<std::int64_t>(1, args.trials / 10);
  reports.push_back(rrl::verify_model_invariance<T>(cfg, trials, args.seed + 200, tolerance,
                                                    "model invariance (canonicalizing net)"));
  reports.push_back(rrl::verify_model_not_invariant<T>(
      rrl::strip_global_rrl(cfg), trials, args.seed + 201, 1e-6,
      "anti-test: without whole-map canonicalization invariance must break"));
  reports.push_back(rrl::verify_model_not_invariant<T>(
      rrl::strip_all_rrl(cfg), trials, args.seed + 202, 1e-6,
      "anti-test: plain baseline must not be invariant"));
}

int run_verify(const VerifyArgs& args) {
  std::vector<rrl::Report> reports;
  if (args.suite == "window" || args.suite == "all") run_window_suite(args, reports);
  if (args.suite == "layer" || args.suite == "all") run_layer_suite(args, reports);
  if (args.suite == "model" || args.suite == "all") {
    if (args.config.empty()) {
      run_model_suite<double>(args, rrl::lenet5_rrl_config(), 1e-12, reports);
    } else {
      const rrl::NetworkConfig cfg = rrl::parse_config_file(args.config);
      if (cfg.precision == 64) {
        run_model_suite<double>(args, cfg, 1e-12, reports);
      } else {
        run_model_suite<float>(args, cfg, 1e-5, reports);
      }
    }
  }
  if (reports.empty()) throw rrl::config_error("--suite must be window, layer, model or all");
  std::int64_t failed = 0;
  for (const auto& r : reports) {
    std::cout << r.summary() << "\n";
    if (!r.passed()) ++failed;
  }
  std::cout << "verify: " << reports.size() << " suites, " << failed << " failed\n";
  return failed == 0 ? 0 : 1;
}

template <typename T>
int run_sweep(const SweepArgs& args, const rrl::NetworkConfig& cfg) {
  rrl::Network<T> net(cfg, /*seed=*/1);
  net.load(args.checkpoint);
  const rrl::Dataset<T> test = rrl::load_split<T>(args.data, /*train=*/false);
  const rrl::SweepResult sweep = rrl::sweep_angles(net, test, args.step_degrees, args.limit);
  const std::string csv = rrl::sweep_csv(sweep);
  if (args.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(args.out, std::ios::trunc);
    if (!out) throw rrl::io_error("cannot open '" + args.out + "' for writing");
    out << csv;
    if (!out.flush()) throw rrl::io_error("failed writing '" + args.out + "'");
    std::cout << "wrote " << args.out << "\n";
  }
  return 0;
}

/// Lays the channels of one activation out as a tile grid (one min-max
/// normalized tile per channel) and writes it as a PGM.
template <typename T>
void write_feature_grid(const std::string& path, const rrl::Tensor<T>& act) {
  const std::int64_t H = act.height(), W = act.width(), C = act.channels();
  const std::int64_t cols = static_cast<std::int64_t>(
      std::ceil(std::sqrt(static_cast<double>(C))));
  const std::int64_t rows = (C + cols - 1) / cols;
  rrl::Tensor<T> grid(1, rows * H + (rows - 1), cols * W + (cols - 1), 1);
  for (std::int64_t c = 0; c < C; ++c) {
    T lo = act(0, 0, 0, c), hi = lo;
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t w = 0; w < W; ++w) {
        lo = std::min(lo, act(0, h, w, c));
        hi = std::max(hi, act(0, h, w, c));
      }
    }
    const T span = hi > lo ? hi - lo : T{1};
    const std::int64_t r0 = (c / cols) * (H + 1), c0 = (c % cols) * (W + 1);
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t w = 0; w < W; ++w) {
        grid(0, r0 + h, c0 + w, 0) = (act(0, h, w, c) - lo) / span;
      }
    }
  }
  rrl::write_pgm(path, grid);
}

template <typename T>
int run_dump(const DumpArgs& args, const rrl::NetworkConfig& cfg) {
  rrl::Network<T> net(cfg, /*seed=*/1);
  net.load(args.checkpoint);
  const rrl::Tensor<T> image = rrl::load_pnm<T>(args.image);
  const rrl::Trace<T> trace = net.forward(image);
  if (args.layer < 0 || args.layer >= static_cast<std::int64_t>(trace.acts.size())) {
    throw rrl::config_error("--layer must be in [0, " + std::to_string(trace.acts.size() - 1) +
                            "] (0 = input, k = output of layer k)");
  }
  write_feature_grid(args.out, trace.acts[static_cast<std::size_t>(args.layer)]);
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

int run_boxes(const BoxArgs& args) {
  const std::vector<rrl::LabeledBox> boxes = rrl::load_box_file(args.boxes);
  std::vector<rrl::LabeledBox> turned;
  turned.reserve(boxes.size());
  for (const auto& lb : boxes) {
    turned.push_back({lb.label, rrl::rotate_bbox(lb.box, args.n, args.width, args.height)});
  }
  std::cout << rrl::format_boxes(turned);
  return 0;
}

int precision_of(const rrl::NetworkConfig& cfg, int override_bits) {
  if (override_bits == 0) return cfg.precision;
  if (override_bits != 32 && override_bits != 64) {
    throw rrl::config_error("--precision must be 32 or 64");
  }
  return override_bits;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotation-canonicalizing convolutional networks: train, verify, and probe"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = all available cores)")
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a network and write a checkpoint");
  train->add_option("--config", train_args.config, "Network config file")->required();
  train->add_option("--data", train_args.data, "Dataset directory")->required();
  train->add_option("--out", train_args.out, "Checkpoint output path")->required();
  train->add_option("--epochs", train_args.epochs)->capture_default_str();
  train->add_option("--lr", train_args.lr)->capture_default_str();
  train->add_option("--batch", train_args.batch)->capture_default_str();
  train->add_option("--seed", train_args.seed)->capture_default_str();
  train->add_option("--precision", train_args.precision, "Override config precision (32 or 64)");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
  eval_cmd->add_option("--config", eval_args.config)->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval_cmd->add_option("--data", eval_args.data)->required();
  eval_cmd->add_option("--rotate", eval_args.rotate, "none, rot (quarter turns) or rot+ (any angle)")
      ->capture_default_str();
  eval_cmd->add_option("--seed", eval_args.seed, "Seed for the rotated test set")
      ->capture_default_str();
  eval_cmd->add_option("--csv", eval_args.csv_path, "Write per-image CSV here instead of stdout");

  VerifyArgs verify_args;
  CLI::App* verify = app.add_subcommand("verify", "Run the property verification suites");
  verify->add_option("--suite", verify_args.suite, "window, layer, model or all")
      ->capture_default_str();
  verify->add_option("--trials", verify_args.trials)->capture_default_str();
  verify->add_option("--seed", verify_args.seed)->capture_default_str();
  verify->add_option("--config", verify_args.config, "Model-suite architecture (default built-in)");

  SweepArgs sweep_args;
  CLI::App* sweep = app.add_subcommand("sweep", "Feature drift vs rotation angle, as CSV");
  sweep->add_option("--config", sweep_args.config)->required();
  sweep->add_option("--checkpoint", sweep_args.checkpoint)->required();
  sweep->add_option("--data", sweep_args.data)->required();
  sweep->add_option("--step-degrees", sweep_args.step_degrees)->capture_default_str();
  sweep->add_option("--limit", sweep_args.limit, "Max images from the test split")
      ->capture_default_str();
  sweep->add_option("--out", sweep_args.out, "Write CSV here instead of stdout");

  DumpArgs dump_args;
  CLI::App* dump = app.add_subcommand("dump-features", "Write one activation as a PGM tile grid");
  dump->add_option("--config", dump_args.config)->required();
  dump->add_option("--checkpoint", dump_args.checkpoint)->required();
  dump->add_option("--image", dump_args.image, "Input image (P5/P6)")->required();
  dump->add_option("--layer", dump_args.layer, "0 = input, k = output of layer k")->required();
  dump->add_option("--out", dump_args.out, "Output PGM path")->required();

  BoxArgs box_args;
  CLI::App* boxes = app.add_subcommand("transform-boxes",
                                       "Map a box list through quarter turns of its canvas");
  boxes->add_option("--boxes", box_args.boxes, "Box list file (label x1 y1 x2 y2)")->required();
  boxes->add_option("--n", box_args.n, "Counterclockwise quarter turns")
      ->required()
      ->check(CLI::Range(0, 3));
  boxes->add_option("--width", box_args.width, "Canvas width")->required();
  boxes->add_option("--height", box_args.height, "Canvas height")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    rrl::set_thread_count(threads);
    if (*train) {
      const rrl::NetworkConfig cfg = rrl::parse_config_file(train_args.config);
      return precision_of(cfg, train_args.precision) == 64 ? run_train<double>(train_args, cfg)
                                                           : run_train<float>(train_args, cfg);
    }
    if (*eval_cmd) {
      const rrl::NetworkConfig cfg = rrl::parse_config_file(eval_args.config);
      return cfg.precision == 64 ? run_eval<double>(eval_args, cfg)
                                 : run_eval<float>(eval_args, cfg);
    }
    if (*verify) return run_verify(verify_args);
    if (*sweep) {
      const rrl::NetworkConfig cfg = rrl::parse_config_file(sweep_args.config);
      return cfg.precision == 64 ? run_sweep<double>(sweep_args, cfg)
                                 : run_sweep<float>(sweep_args, cfg);
    }
    if (*dump) {
      const rrl::NetworkConfig cfg = rrl::parse_config_file(dump_args.config);
      return cfg.precision == 64 ? run_dump<double>(dump_args, cfg)
                                 : run_dump<float>(dump_args, cfg);
    }
    if (*boxes) return run_boxes(box_args);
    throw rrl::config_error("no command given");
  } catch (const rrl::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rrl::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
