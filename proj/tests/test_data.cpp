#include <doctest.h>

#include <cmath>

#include "srda/data.hpp"
#include "srda/errors.hpp"
#include "srda/io.hpp"
#include "srda/npy.hpp"
#include "srda/ratio_prior.hpp"
#include "srda/rng.hpp"
#include "temp_dir.hpp"

using namespace srda;

namespace {

const std::vector<PhantomVolume>& default_run() {
  static const std::vector<PhantomVolume> vols = generate_phantoms(0, 16, 12, 64, 64);
  return vols;
}

LabelMask slice_mask(const PhantomVolume& v, int d) {
  LabelMask m(v.height, v.width);
  std::copy_n(v.mask.begin() + static_cast<std::ptrdiff_t>(v.slice_size() * d), v.slice_size(), m.values.begin());
  return m;
}

}  // namespace

TEST_CASE("phantoms are deterministic per seed") {
  const auto a = generate_phantoms(5, 2, 4, 32, 32);
  const auto b = generate_phantoms(5, 2, 4, 32, 32);
  const auto c = generate_phantoms(6, 2, 4, 32, 32);
  for (std::size_t v = 0; v < a.size(); ++v) {
    CHECK(a[v].mask == b[v].mask);
    CHECK(a[v].image_a == b[v].image_a);
    CHECK(a[v].image_b == b[v].image_b);
  }
  CHECK(a[0].image_b != c[0].image_b);
}

TEST_CASE("default run has enough background-only slices and a bounded foreground ratio") {
  int empty = 0;
  int total = 0;
  for (const auto& v : default_run()) {
    for (int d = 0; d < v.depth; ++d) {
      ++total;
      const ClassRatio r = gt_ratio(slice_mask(v, d), 2);
      if (r[1] == 0.0) {
        ++empty;
        CHECK(!v.slice_has_foreground(d));
        continue;
      }
      CHECK(v.slice_has_foreground(d));
      CHECK(r[1] >= 0.02);
      CHECK(r[1] <= 0.25);
    }
  }
  CHECK(total == 192);
  CHECK(empty >= total / 10);
}

TEST_CASE("images lie in [0,1] and the modalities differ") {
  const auto& v = default_run()[0];
  double diff = 0.0;
  for (std::size_t i = 0; i < v.image_a.size(); ++i) {
    CHECK(v.image_a[i] >= 0.0f);
    CHECK(v.image_a[i] <= 1.0f);
    CHECK(v.image_b[i] >= 0.0f);
    CHECK(v.image_b[i] <= 1.0f);
    diff += std::abs(v.image_a[i] - v.image_b[i]);
  }
  CHECK(diff / static_cast<double>(v.image_a.size()) > 0.02);
}

TEST_CASE("slices of both modalities share the mask and tags") {
  const std::vector<int> ids = {0, 1};
  const auto a = to_slices(default_run(), ids, Modality::a);
  const auto b = to_slices(default_run(), ids, Modality::b);
  REQUIRE(a.size() == 24);
  REQUIRE(b.size() == 24);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].mask.values == b[i].mask.values);
    CHECK(gt_ratio(a[i].mask, 2) == gt_ratio(b[i].mask, 2));
    const bool any = std::any_of(a[i].mask.values.begin(), a[i].mask.values.end(), [](auto x) { return x != 0; });
    CHECK(a[i].has_foreground == any);
  }
}

TEST_CASE("degenerate dimensions are rejected") {
  CHECK_THROWS_AS(generate_phantoms(0, 2, 4, 8, 64), ValueError);
  CHECK_THROWS_AS(generate_phantoms(0, 2, 0, 64, 64), ValueError);
  CHECK_THROWS_AS(generate_phantoms(0, 0, 4, 64, 64), ValueError);
}

TEST_CASE("modality transform") {
  Rng rng(31);
  std::vector<float> img(20 * 24);
  for (float& v : img) v = static_cast<float>(rng.uniform());

  ModalityParams identity;
  CHECK(modality_transform(img, 20, 24, identity) == img);

  ModalityParams inv;
  inv.invert = true;
  const auto twice = modality_transform(modality_transform(img, 20, 24, inv), 20, 24, inv);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(twice[i] == doctest::Approx(img[i]).epsilon(1e-6));

  for (int t = 0; t < 20; ++t) {
    ModalityParams p;
    p.invert = t % 2 == 0;
    p.gamma = rng.uniform(0.6, 1.6);
    p.bias_amplitude = rng.uniform(0.0, 0.5);
    p.noise_sigma = rng.uniform(0.01, 0.05);
    p.field_seed = rng.next();
    p.noise_seed = rng.next();
    std::vector<float> wild(img.size());
    for (float& v : wild) v = static_cast<float>(rng.uniform(-0.5, 1.5));
    for (float v : modality_transform(wild, 20, 24, p)) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("split") {
  const std::vector<int> ids = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  const VolumeSplit s = split(ids, 13, 3);
  CHECK(s.train.size() == 13);
  CHECK(s.val.size() == 3);
  for (int v : s.val) CHECK(std::find(s.train.begin(), s.train.end(), v) == s.train.end());
  const VolumeSplit again = split(ids, 13, 3);
  CHECK(again.train == s.train);
  CHECK(again.val == s.val);
  CHECK_THROWS_AS(split(ids, 14, 3), ValueError);
}

TEST_CASE("dataset save and load round trip") {
  TempDir dir("dataset");
  const auto vols = generate_phantoms(3, 3, 4, 32, 32);
  save_dataset(dir.path(), vols, 3, PhantomConfig{});
  const DatasetManifest m = load_manifest(dir.path());
  CHECK(m.volumes == std::vector<int>{0, 1, 2});
  CHECK(m.depth == 4);
  CHECK(m.height == 32);
  const std::vector<int> ids = {1, 2};
  const auto from_disk = load_slices(dir.path(), m, ids, Modality::b, true);
  const auto in_memory = to_slices(vols, ids, Modality::b);
  REQUIRE(from_disk.size() == in_memory.size());
  for (std::size_t i = 0; i < from_disk.size(); ++i) {
    CHECK(from_disk[i].image.data == in_memory[i].image.data);
    CHECK(from_disk[i].mask.values == in_memory[i].mask.values);
    CHECK(from_disk[i].has_foreground == in_memory[i].has_foreground);
  }

  io::clear_read_log();
  const auto unlabeled = load_slices(dir.path(), m, ids, Modality::b, false);
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    CHECK(unlabeled[i].mask.values.empty());
    CHECK(unlabeled[i].has_foreground == in_memory[i].has_foreground);
  }
  for (const auto& p : io::read_log()) {
    CHECK(p.find("mask") == std::string::npos);
    CHECK(p.find("image_modA") == std::string::npos);
  }
}

TEST_CASE("npy round trip and dtype conversion") {
  TempDir dir("npy");
  const std::vector<float> f = {0.5f, -1.0f, 3.25f, 0.0f, 7.0f, 1e-3f};
  write_npy(dir / "f.npy", f, {2, 3});
  const NpyArray a = read_npy(dir / "f.npy");
  CHECK(a.dtype == "<f4");
  CHECK(a.shape == std::vector<std::size_t>{2, 3});
  CHECK(npy_as_float(a) == f);

  const std::vector<std::uint8_t> u = {0, 1, 1, 0};
  write_npy(dir / "u.npy", u, {4});
  CHECK(npy_as_u8(read_npy(dir / "u.npy")) == u);

  const auto bytes = io::read_bytes(dir / "f.npy");
  CHECK((bytes.size() - f.size() * 4) % 64 == 0);
  auto broken = bytes;
  broken[0] = 'X';
  CHECK_THROWS_AS(parse_npy(broken), IoError);
  broken = bytes;
  broken.resize(bytes.size() - 4);
  CHECK_THROWS_AS(parse_npy(broken), IoError);
}

TEST_CASE("real slice loader") {
  TempDir dir("real");
  SUBCASE("empty directory gives no slices") { CHECK(load_real_slices(dir.path(), SliceLayout{}).empty()); }
  SUBCASE("volumes are sliced and normalised") {
    std::filesystem::create_directories(dir / "s1");
    std::filesystem::create_directories(dir / "s2");
    std::vector<float> img(3 * 4 * 5);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = 100.0f + static_cast<float>(i);
    std::vector<std::uint8_t> mask(img.size(), 0);
    mask[7] = 1;
    write_npy(dir / "s1" / "image.npy", img, {3, 4, 5});
    write_npy(dir / "s1" / "mask.npy", mask, {3, 4, 5});
    write_npy(dir / "s2" / "image.npy", std::span<const float>(img).first(2 * 4 * 5), {2, 4, 5});
    write_npy(dir / "s2" / "mask.npy", std::span<const std::uint8_t>(mask).first(2 * 4 * 5), {2, 4, 5});
    const auto s = load_real_slices(dir.path(), SliceLayout{});
    REQUIRE(s.size() == 5);
    CHECK(s[0].has_foreground);
    CHECK(!s[1].has_foreground);
    float lo = 1.0f;
    float hi = 0.0f;
    for (int i = 0; i < 3; ++i)
      for (float v : s[static_cast<std::size_t>(i)].image.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);
  }
  SUBCASE("missing mask") {
    std::filesystem::create_directories(dir / "s1");
    const std::vector<float> img(2 * 4 * 4, 1.0f);
    write_npy(dir / "s1" / "image.npy", img, {2, 4, 4});
    CHECK_THROWS_AS(load_real_slices(dir.path(), SliceLayout{}), IoError);
  }
  SUBCASE("shape mismatch") {
    std::filesystem::create_directories(dir / "s1");
    const std::vector<float> img(2 * 4 * 4, 1.0f);
    const std::vector<std::uint8_t> mask(2 * 4 * 5, 0);
    write_npy(dir / "s1" / "image.npy", img, {2, 4, 4});
    write_npy(dir / "s1" / "mask.npy", mask, {2, 4, 5});
    CHECK_THROWS_AS(load_real_slices(dir.path(), SliceLayout{}), ShapeError);
  }
  SUBCASE("unreadable image") {
    std::filesystem::create_directories(dir / "s1");
    io::write_text(dir / "s1" / "image.npy", "not numpy");
    const std::vector<std::uint8_t> mask(16, 0);
    write_npy(dir / "s1" / "mask.npy", mask, {1, 4, 4});
    CHECK_THROWS_AS(load_real_slices(dir.path(), SliceLayout{}), IoError);
  }
}
