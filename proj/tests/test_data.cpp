#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rrl/data.hpp"
#include "rrl/geometry.hpp"
#include "rrl/rng.hpp"
#include "rrl/tensor.hpp"

using Catch::Matchers::ContainsSubstring;
using rrl::Dataset;
using rrl::io_error;
using rrl::Tensor;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "rrl_data_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void push_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// 2 images of 2x3 pixels plus matching labels, built byte by byte.
std::string fixture_images() {
  std::string bytes;
  push_be32(bytes, 0x00000803u);
  push_be32(bytes, 2);
  push_be32(bytes, 2);  // rows
  push_be32(bytes, 3);  // cols
  for (const int px : {0, 51, 102, 153, 204, 255, 255, 0, 10, 20, 30, 40}) {
    bytes.push_back(static_cast<char>(px));
  }
  return bytes;
}

std::string fixture_labels() {
  std::string bytes;
  push_be32(bytes, 0x00000801u);
  push_be32(bytes, 2);
  bytes.push_back(7);
  bytes.push_back(3);
  return bytes;
}

}  // namespace

TEST_CASE("load_idx reads the classic container byte for byte") {
  TempDir tmp;
  write_bytes(tmp.file("imgs"), fixture_images());
  write_bytes(tmp.file("labs"), fixture_labels());

  const Dataset<float> ds = rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs"));
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.height() == 2);
  REQUIRE(ds.width() == 3);
  REQUIRE(ds.channels() == 1);
  REQUIRE(ds.labels == std::vector<int>{7, 3});

  const std::vector<int> first = {0, 51, 102, 153, 204, 255};
  for (std::size_t i = 0; i < first.size(); ++i) {
    REQUIRE(ds.images[0].data()[i] == static_cast<float>(first[i]) / 255.0f);
  }
  REQUIRE(ds.images[1].data()[0] == 1.0f);
  REQUIRE(ds.images[1].data()[1] == 0.0f);
}

TEST_CASE("save_idx writes back the identical bytes") {
  TempDir tmp;
  write_bytes(tmp.file("imgs"), fixture_images());
  write_bytes(tmp.file("labs"), fixture_labels());
  const Dataset<float> ds = rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs"));

  rrl::save_idx(ds, tmp.file("imgs2"), tmp.file("labs2"));
  REQUIRE(read_bytes(tmp.file("imgs2")) == fixture_images());
  REQUIRE(read_bytes(tmp.file("labs2")) == fixture_labels());

  Dataset<float> rgb;
  rgb.images.push_back(Tensor<float>(1, 2, 2, 3));
  rgb.labels.push_back(0);
  REQUIRE_THROWS_AS(rrl::save_idx(rgb, tmp.file("x"), tmp.file("y")), io_error);
}

TEST_CASE("the container loader raises distinct errors") {
  TempDir tmp;

  std::string bad_magic = fixture_images();
  bad_magic[3] = 0x05;
  write_bytes(tmp.file("imgs"), bad_magic);
  write_bytes(tmp.file("labs"), fixture_labels());
  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs")),
                    rrl::idx_magic_error);

  std::string bad_lab_magic = fixture_labels();
  bad_lab_magic[3] = 0x02;
  write_bytes(tmp.file("imgs"), fixture_images());
  write_bytes(tmp.file("labs"), bad_lab_magic);
  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs")),
                    rrl::idx_magic_error);

  // Payload shorter than the declared image count.
  write_bytes(tmp.file("imgs"), fixture_images().substr(0, 16 + 6));
  write_bytes(tmp.file("labs"), fixture_labels());
  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs")),
                    rrl::idx_truncated_error);

  // Header cut off mid-field.
  write_bytes(tmp.file("imgs"), fixture_images().substr(0, 10));
  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs")),
                    rrl::idx_truncated_error);

  // Image and label counts disagree.
  std::string three_labels = fixture_labels();
  three_labels[7] = 3;
  three_labels.push_back(1);
  write_bytes(tmp.file("imgs"), fixture_images());
  write_bytes(tmp.file("labs"), three_labels);
  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("imgs"), tmp.file("labs")),
                    rrl::idx_count_error);

  REQUIRE_THROWS_AS(rrl::load_idx<float>(tmp.file("absent"), tmp.file("labs")), io_error);
}

TEST_CASE("load_pnm handles both graymap and pixmap flavors") {
  TempDir tmp;

  // Graymap with a header comment.
  std::string pgm = "P5\n# test image\n3 2\n255\n";
  for (const int px : {0, 128, 255, 64, 32, 16}) pgm.push_back(static_cast<char>(px));
  write_bytes(tmp.file("a.pgm"), pgm);
  const Tensor<double> gray = rrl::load_pnm<double>(tmp.file("a.pgm"));
  REQUIRE(gray.height() == 2);
  REQUIRE(gray.width() == 3);
  REQUIRE(gray.channels() == 1);
  REQUIRE(gray(0, 0, 1, 0) == 128.0 / 255.0);
  REQUIRE(gray(0, 1, 2, 0) == 16.0 / 255.0);

  // Low maxval rescales accordingly.
  std::string dim = "P5 2 1 100\n";
  dim.push_back(50);
  dim.push_back(100);
  write_bytes(tmp.file("dim.pgm"), dim);
  const Tensor<double> scaled = rrl::load_pnm<double>(tmp.file("dim.pgm"));
  REQUIRE(scaled(0, 0, 0, 0) == 0.5);
  REQUIRE(scaled(0, 0, 1, 0) == 1.0);

  // Color pixmap.
  std::string ppm = "P6\n2 1\n255\n";
  for (const int px : {255, 0, 0, 0, 255, 0}) ppm.push_back(static_cast<char>(px));
  write_bytes(tmp.file("c.ppm"), ppm);
  const Tensor<double> color = rrl::load_pnm<double>(tmp.file("c.ppm"));
  REQUIRE(color.channels() == 3);
  REQUIRE(color(0, 0, 0, 0) == 1.0);
  REQUIRE(color(0, 0, 1, 1) == 1.0);
  REQUIRE(color(0, 0, 1, 2) == 0.0);

  // Sixteen-bit samples are big-endian.
  std::string wide = "P5 1 1 1000\n";
  wide.push_back(0x01);
  wide.push_back(0xf4);  // 500
  write_bytes(tmp.file("w.pgm"), wide);
  REQUIRE(rrl::load_pnm<double>(tmp.file("w.pgm"))(0, 0, 0, 0) == 0.5);

  write_bytes(tmp.file("bad.pnm"), "P4\n1 1\n");
  REQUIRE_THROWS_WITH(rrl::load_pnm<double>(tmp.file("bad.pnm")), ContainsSubstring("P5 or P6"));
  write_bytes(tmp.file("short.pgm"), "P5 4 4 255\nxy");
  REQUIRE_THROWS_WITH(rrl::load_pnm<double>(tmp.file("short.pgm")),
                      ContainsSubstring("truncated"));
  write_bytes(tmp.file("dims.pgm"), "P5 0 4 255\n");
  REQUIRE_THROWS_AS(rrl::load_pnm<double>(tmp.file("dims.pgm")), io_error);
  write_bytes(tmp.file("deep.pgm"), "P5 1 1 70000\n..");
  REQUIRE_THROWS_AS(rrl::load_pnm<double>(tmp.file("deep.pgm")), io_error);
  write_bytes(tmp.file("alpha.pgm"), "P5 x 4 255\n");
  REQUIRE_THROWS_AS(rrl::load_pnm<double>(tmp.file("alpha.pgm")), io_error);
  REQUIRE_THROWS_AS(rrl::load_pnm<double>(tmp.file("nope.pgm")), io_error);
}

TEST_CASE("write_pgm then load_pnm reproduces the quantized image") {
  TempDir tmp;
  rrl::Rng rng(81);
  Tensor<double> img(1, 5, 4, 1);
  for (auto& v : img.data()) v = rng.uniform(-0.2, 1.2);  // exercises clamping
  rrl::write_pgm(tmp.file("img.pgm"), img);
  const Tensor<double> back = rrl::load_pnm<double>(tmp.file("img.pgm"));
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    const double clamped = std::clamp(img.data()[i], 0.0, 1.0);
    REQUIRE(back.data()[i] == static_cast<double>(std::lround(clamped * 255.0)) / 255.0);
  }
  Tensor<double> color(1, 2, 2, 3);
  REQUIRE_THROWS_AS(rrl::write_pgm(tmp.file("c.pgm"), color), io_error);
}

TEST_CASE("load_image_dir follows the manifest") {
  TempDir tmp;
  Tensor<double> a = Tensor<double>::full(1, 3, 3, 1, 0.5);
  Tensor<double> b = Tensor<double>::full(1, 3, 3, 1, 1.0);
  rrl::write_pgm(tmp.file("a.pgm"), a);
  rrl::write_pgm(tmp.file("we,ird.pgm"), b);

  const std::string manifest = tmp.file("list.csv");
  write_bytes(manifest,
              "# name,label\n"
              "a.pgm,0\n"
              "we,ird.pgm,4\n");
  const Dataset<double> ds = rrl::load_image_dir<double>(tmp.path.string(), manifest);
  REQUIRE(ds.size() == 2);
  REQUIRE(ds.labels == std::vector<int>{0, 4});
  REQUIRE(ds.images[0](0, 1, 1, 0) == Catch::Approx(0.5).margin(1.0 / 255.0));
  REQUIRE(ds.images[1](0, 0, 0, 0) == 1.0);

  write_bytes(manifest, "a.pgm,zebra\n");
  REQUIRE_THROWS_WITH(rrl::load_image_dir<double>(tmp.path.string(), manifest),
                      ContainsSubstring("line 1") && ContainsSubstring("bad label"));
  write_bytes(manifest, "a.pgm\n");
  REQUIRE_THROWS_WITH(rrl::load_image_dir<double>(tmp.path.string(), manifest),
                      ContainsSubstring("filename,label"));
  rrl::write_pgm(tmp.file("big.pgm"), Tensor<double>::full(1, 4, 4, 1, 0.1));
  write_bytes(manifest, "a.pgm,1\nbig.pgm,2\n");
  REQUIRE_THROWS_WITH(rrl::load_image_dir<double>(tmp.path.string(), manifest),
                      ContainsSubstring("line 2") && ContainsSubstring("shape"));
  REQUIRE_THROWS_AS(rrl::load_image_dir<double>(tmp.path.string(), tmp.file("nope.csv")),
                    io_error);
}

TEST_CASE("mask_dataset masks every image and keeps the bookkeeping") {
  rrl::Rng rng(82);
  Dataset<double> ds;
  ds.class_names = {"a", "b"};
  for (int i = 0; i < 3; ++i) {
    Tensor<double> img(1, 8, 8, 1);
    for (auto& v : img.data()) v = rng.uniform(0.5, 1.0);
    ds.images.push_back(img);
    ds.labels.push_back(i % 2);
  }
  const Dataset<double> masked = rrl::mask_dataset(ds);
  REQUIRE(masked.labels == ds.labels);
  REQUIRE(masked.class_names == ds.class_names);
  for (std::size_t i = 0; i < masked.images.size(); ++i) {
    REQUIRE(masked.images[i] == rrl::inscribed_circle_mask(ds.images[i], 0.0));
  }
}

TEST_CASE("quarter-turn test sets are deterministic, masked rotations of the source") {
  rrl::Rng rng(83);
  Dataset<double> ds;
  ds.class_names = rrl::synthetic_class_names();
  for (int i = 0; i < 20; ++i) {
    Tensor<double> img(1, 8, 8, 1);
    for (auto& v : img.data()) v = rng.uniform(0.0, 1.0);
    ds.images.push_back(img);
    ds.labels.push_back(i % 10);
  }

  const Dataset<double> rot_a = rrl::make_rot_testset(ds, 5);
  const Dataset<double> rot_b = rrl::make_rot_testset(ds, 5);
  const Dataset<double> rot_c = rrl::make_rot_testset(ds, 6);
  REQUIRE(rot_a.labels == ds.labels);
  REQUIRE(rot_a.class_names == ds.class_names);

  bool identical_ab = true, identical_ac = true;
  std::vector<int> used_turns;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    identical_ab = identical_ab && rot_a.images[i] == rot_b.images[i];
    identical_ac = identical_ac && rot_a.images[i] == rot_c.images[i];
    int matched = -1;
    for (int k = 0; k < 4; ++k) {
      if (rot_a.images[i] == rrl::inscribed_circle_mask(rot90(ds.images[i], k), 0.0)) {
        matched = k;
        break;
      }
    }
    REQUIRE(matched >= 0);
    used_turns.push_back(matched);
  }
  REQUIRE(identical_ab);
  REQUIRE_FALSE(identical_ac);
  // With 20 draws the turn distribution cannot be constant.
  REQUIRE(std::vector<int>(used_turns.begin(), used_turns.end()) != std::vector<int>(20, used_turns[0]));

  Dataset<double> rect;
  rect.images.push_back(Tensor<double>(1, 4, 6, 1));
  rect.labels.push_back(0);
  REQUIRE_THROWS_AS(rrl::make_rot_testset(rect, 1), std::invalid_argument);
}

TEST_CASE("free-angle test sets are deterministic and masked") {
  rrl::Rng rng(84);
  Dataset<double> ds;
  for (int i = 0; i < 5; ++i) {
    Tensor<double> img(1, 12, 12, 1);
    for (auto& v : img.data()) v = rng.uniform(0.3, 1.0);
    ds.images.push_back(img);
    ds.labels.push_back(i);
  }
  const Dataset<double> a = rrl::make_rotplus_testset(ds, 9);
  const Dataset<double> b = rrl::make_rotplus_testset(ds, 9);
  REQUIRE(a.labels == ds.labels);
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    REQUIRE(a.images[i] == b.images[i]);
    REQUIRE(a.images[i](0, 0, 0, 0) == 0.0);  // corner masked
    REQUIRE_FALSE(a.images[i] == rrl::inscribed_circle_mask(ds.images[i], 0.0));
  }
  REQUIRE_THROWS_AS(rrl::make_rotplus_testset(Dataset<double>{{Tensor<double>(1, 3, 4, 1)}, {0}, {}}, 1),
                    std::invalid_argument);
}

TEST_CASE("the synthetic dataset is balanced, bounded, and reproducible") {
  const auto ds = rrl::make_synthetic_dataset<float>(40, 123);
  REQUIRE(ds.size() == 40);
  REQUIRE(ds.height() == 28);
  REQUIRE(ds.width() == 28);
  REQUIRE(ds.channels() == 1);
  REQUIRE(ds.class_names == rrl::synthetic_class_names());

  std::vector<int> counts(10, 0);
  for (const int lab : ds.labels) {
    REQUIRE(lab >= 0);
    REQUIRE(lab < 10);
    ++counts[static_cast<std::size_t>(lab)];
  }
  REQUIRE(counts == std::vector<int>(10, 4));

  for (const auto& img : ds.images) {
    for (const float v : img.data()) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }

  const auto again = rrl::make_synthetic_dataset<float>(40, 123);
  const auto other = rrl::make_synthetic_dataset<float>(40, 124);
  bool same = true, different = false;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    same = same && ds.images[i] == again.images[i];
    different = different || !(ds.images[i] == other.images[i]);
  }
  REQUIRE(same);
  REQUIRE(different);

  // Images carry signal: every class has nontrivial mass.
  for (int c = 0; c < 10; ++c) {
    double mass = 0;
    for (std::int64_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[static_cast<std::size_t>(i)] != c) continue;
      for (const float v : ds.images[static_cast<std::size_t>(i)].data()) mass += v;
    }
    REQUIRE(mass > 1.0);
  }

  const auto big = rrl::make_synthetic_dataset<float>(4, 5, 32);
  REQUIRE(big.height() == 32);
  REQUIRE_THROWS_AS(rrl::make_synthetic_dataset<float>(0, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(rrl::make_synthetic_dataset<float>(4, 1, 8), std::invalid_argument);
}

TEST_CASE("subset, stack_images, and gather_labels") {
  const auto ds = rrl::make_synthetic_dataset<float>(12, 3);
  const auto head = rrl::subset(ds, 5);
  REQUIRE(head.size() == 5);
  REQUIRE(head.class_names == ds.class_names);
  REQUIRE(head.labels == std::vector<int>(ds.labels.begin(), ds.labels.begin() + 5));
  REQUIRE(head.images[4] == ds.images[4]);
  REQUIRE_THROWS_AS(rrl::subset(ds, 13), std::invalid_argument);

  const std::vector<std::int64_t> picks = {1, 3, 7};
  const Tensor<float> batch = rrl::stack_images(ds, picks);
  REQUIRE(batch.batch() == 3);
  REQUIRE(batch.height() == 28);
  for (std::size_t bi = 0; bi < picks.size(); ++bi) {
    for (std::int64_t h = 0; h < 28; ++h) {
      for (std::int64_t w = 0; w < 28; ++w) {
        if (batch(static_cast<std::int64_t>(bi), h, w, 0) !=
            ds.images[static_cast<std::size_t>(picks[bi])](0, h, w, 0)) {
          FAIL("stacked batch diverges from source images");
        }
      }
    }
  }
  REQUIRE(rrl::gather_labels(ds, picks) ==
          std::vector<int>{ds.labels[1], ds.labels[3], ds.labels[7]});
  REQUIRE_THROWS_AS(rrl::stack_images(ds, {}), std::invalid_argument);
}
