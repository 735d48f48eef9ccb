// Generates the procedural 10-class shape dataset in the standard IDX
// container layout (train/test split) so the main CLI can consume it.

#include <cstdint>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rrl/data.hpp"
#include "rrl/errors.hpp"
#include "rrl/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a procedural shape dataset as IDX files"};
  std::string out_dir;
  std::int64_t train_count = 2000;
  std::int64_t test_count = 1000;
  std::int64_t side = 28;
  std::uint64_t seed = 1;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--train", train_count, "Training image count")->capture_default_str();
  app.add_option("--test", test_count, "Test image count")->capture_default_str();
  app.add_option("--side", side, "Image side length")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::filesystem::create_directories(out_dir);
    const auto train = rrl::make_synthetic_dataset<float>(train_count, seed, side);
    const auto test = rrl::make_synthetic_dataset<float>(test_count, rrl::Rng::splitmix(seed), side);
    rrl::save_idx(train, out_dir + "/" + rrl::train_images_name(),
                  out_dir + "/" + rrl::train_labels_name());
    rrl::save_idx(test, out_dir + "/" + rrl::test_images_name(),
                  out_dir + "/" + rrl::test_labels_name());
    std::cout << "wrote " << train.size() << " train and " << test.size() << " test images to "
              << out_dir << "\n";
    return 0;
  } catch (const rrl::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const rrl::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
