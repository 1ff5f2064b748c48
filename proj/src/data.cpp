#include "srda/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>

#include "srda/errors.hpp"
#include "srda/io.hpp"
#include "srda/npy.hpp"

namespace srda {

bool PhantomVolume::slice_has_foreground(int d) const {
  const auto begin = mask.begin() + static_cast<std::ptrdiff_t>(slice_size() * d);
  return std::any_of(begin, begin + static_cast<std::ptrdiff_t>(slice_size()), [](std::uint8_t v) { return v != 0; });
}

nlohmann::json to_json(const PhantomConfig& c) {
  return {{"table_a", c.table_a.values},
          {"table_b", c.table_b.values},
          {"texture_amplitude", c.texture_amplitude},
          {"noise_a", c.noise_a},
          {"noise_b", {c.noise_b_min, c.noise_b_max}},
          {"gamma_b", {c.gamma_b_min, c.gamma_b_max}},
          {"bias_b", c.bias_b},
          {"invert_b", c.invert_b},
          {"discs", {c.min_discs, c.max_discs}},
          {"ratio_band", {c.min_ratio, c.max_ratio}}};
}

PhantomConfig phantom_config_from_json(const nlohmann::json& j) {
  PhantomConfig c;
  try {
    if (j.contains("table_a")) c.table_a.values = j.at("table_a").get<std::array<double, 4>>();
    if (j.contains("table_b")) c.table_b.values = j.at("table_b").get<std::array<double, 4>>();
    c.texture_amplitude = j.value("texture_amplitude", c.texture_amplitude);
    c.noise_a = j.value("noise_a", c.noise_a);
    if (j.contains("noise_b")) {
      c.noise_b_min = j.at("noise_b").at(0).get<double>();
      c.noise_b_max = j.at("noise_b").at(1).get<double>();
    }
    if (j.contains("gamma_b")) {
      c.gamma_b_min = j.at("gamma_b").at(0).get<double>();
      c.gamma_b_max = j.at("gamma_b").at(1).get<double>();
    }
    c.bias_b = j.value("bias_b", c.bias_b);
    c.invert_b = j.value("invert_b", c.invert_b);
    if (j.contains("discs")) {
      c.min_discs = j.at("discs").at(0).get<int>();
      c.max_discs = j.at("discs").at(1).get<int>();
    }
    if (j.contains("ratio_band")) {
      c.min_ratio = j.at("ratio_band").at(0).get<double>();
      c.max_ratio = j.at("ratio_band").at(1).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid phantom settings: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ModalityParams& p) {
  return {{"invert", p.invert},
          {"gamma", p.gamma},
          {"bias_amplitude", p.bias_amplitude},
          {"noise_sigma", p.noise_sigma},
          {"field_seed", p.field_seed},
          {"noise_seed", p.noise_seed}};
}

ModalityParams modality_params_from_json(const nlohmann::json& j) {
  ModalityParams p;
  p.invert = j.value("invert", false);
  p.gamma = j.value("gamma", 1.0);
  p.bias_amplitude = j.value("bias_amplitude", 0.0);
  p.noise_sigma = j.value("noise_sigma", 0.0);
  p.field_seed = j.value("field_seed", std::uint64_t{0});
  p.noise_seed = j.value("noise_seed", std::uint64_t{0});
  return p;
}

std::vector<double> smooth_field(Rng& rng, int h, int w, double amplitude) {
  std::vector<double> f(static_cast<std::size_t>(h) * w, 0.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < 3; ++t) {
    const double fx = rng.uniform(0.5, 1.5);
    const double fy = rng.uniform(0.5, 1.5);
    const double px = rng.uniform(0.0, two_pi);
    const double py = rng.uniform(0.0, two_pi);
    for (int y = 0; y < h; ++y) {
      const double sy = std::sin(two_pi * fy * y / h + py);
      for (int x = 0; x < w; ++x)
        f[static_cast<std::size_t>(y) * w + x] += std::sin(two_pi * fx * x / w + px) * sy;
    }
  }
  for (double& v : f) v *= amplitude / 3.0;
  return f;
}

std::vector<float> modality_transform(std::span<const float> image, int h, int w, const ModalityParams& p) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  if (plane == 0 || image.size() % plane != 0) throw ShapeError("modality_transform: image is not a stack of HxW slices");
  Rng field_rng(p.field_seed);
  const std::vector<double> field = smooth_field(field_rng, h, w, p.bias_amplitude);
  Rng noise(p.noise_seed);
  std::vector<float> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    double x = std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
    if (p.invert) x = 1.0 - x;
    if (p.gamma != 1.0) x = std::pow(x, p.gamma);
    x *= 1.0 + field[i % plane];
    if (p.noise_sigma > 0.0) x += noise.normal(0.0, p.noise_sigma);
    out[i] = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return out;
}

namespace {

enum Tissue : std::uint8_t { kBackground = 0, kBody = 1, kVertebra = 2, kDisc = 3 };

struct Disc {
  double cy, cx, ax, ay, ad, theta;
};

// Tissue labels (D, H, W) for one spine phantom; regenerated until every
// slice with disc pixels has a disc fraction inside the configured band.
std::vector<std::uint8_t> make_anatomy(Rng& rng, int D, int H, int W, const PhantomConfig& cfg) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int n = rng.integer(cfg.min_discs, cfg.max_discs);
    const double xc = W / 2.0 + rng.uniform(-0.06, 0.06) * W;
    const double dc = D / 2.0 + rng.uniform(-1.0, 1.0);
    const double top = 0.08 * H;
    const double bot = 0.92 * H;
    const double s = (bot - top) / n;
    std::vector<Disc> discs;
    for (int j = 0; j < n; ++j) {
      Disc d{};
      d.cy = top + (j + 0.5) * s + rng.uniform(-0.08, 0.08) * s;
      d.cx = xc + rng.uniform(-2.0, 2.0);
      d.ax = rng.uniform(0.10, 0.16) * W;
      d.ay = std::min(rng.uniform(0.22, 0.32) * s, 4.5 * H / 64.0);
      d.ad = rng.uniform(0.28, 0.40) * D;
      d.theta = rng.uniform(-0.25, 0.25);
      discs.push_back(d);
    }
    const double body_ax = rng.uniform(0.30, 0.40) * W;
    const double body_cx = xc + rng.uniform(-3.0, 3.0);
    const double vad = rng.uniform(0.40, 0.48) * D;

    std::vector<std::uint8_t> lab(plane * D, kBackground);
    bool ok = true;
    for (int z = 0; z < D && ok; ++z) {
      std::uint8_t* L = lab.data() + plane * z;
      const double dd = z - dc;
      const bool has_vert = std::abs(dd) <= vad;
      const double vs = has_vert ? std::max(0.7, std::sqrt(std::max(0.0, 1.0 - (dd / vad) * (dd / vad)))) : 0.0;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          std::uint8_t t = kBackground;
          const double bx = (x - body_cx) / body_ax;
          const double by = (y - H / 2.0) / (0.55 * H);
          if (bx * bx + by * by <= 1.0) t = kBody;
          if (has_vert && std::abs(x - xc) <= 0.15 * W * vs && y >= top - 0.3 * s && y <= bot + 0.3 * s) t = kVertebra;
          for (const Disc& d : discs) {
            if (std::abs(dd) > d.ad) continue;
            const double sc = std::max(0.6, std::sqrt(std::max(0.0, 1.0 - (dd / d.ad) * (dd / d.ad))));
            const double u = (x - d.cx) * std::cos(d.theta) + (y - d.cy) * std::sin(d.theta);
            const double v = -(x - d.cx) * std::sin(d.theta) + (y - d.cy) * std::cos(d.theta);
            const double eu = u / (d.ax * sc);
            const double ev = v / (d.ay * sc);
            if (eu * eu + ev * ev <= 1.0) t = kDisc;
          }
          L[static_cast<std::size_t>(y) * W + x] = t;
        }
      }
      const auto fg = static_cast<double>(std::count(L, L + plane, kDisc)) / static_cast<double>(plane);
      if (fg > 0.0 && (fg < cfg.min_ratio || fg > cfg.max_ratio)) ok = false;
    }
    if (ok) return lab;
  }
  throw ValueError("could not generate a phantom inside the foreground ratio band; check the dimensions");
}

// Tissue intensities plus a faint texture, a 5-point blur for partial-volume
// edges, then a clip to [0,1].
std::vector<float> render_base(Rng& rng, const std::vector<std::uint8_t>& lab, int D, int H, int W,
                               const TissueTable& table, double texture) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::vector<double> field = smooth_field(rng, H, W, texture);
  std::vector<float> out(lab.size());
  std::vector<double> img(plane);
  for (int z = 0; z < D; ++z) {
    const std::uint8_t* L = lab.data() + plane * z;
    for (std::size_t i = 0; i < plane; ++i) img[i] = table.values[L[i]] + field[i];
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        auto at = [&](int yy, int xx) {
          yy = std::clamp(yy, 0, H - 1);
          xx = std::clamp(xx, 0, W - 1);
          return img[static_cast<std::size_t>(yy) * W + xx];
        };
        const double v = (at(y, x) + at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1)) / 5.0;
        out[plane * z + static_cast<std::size_t>(y) * W + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace

std::vector<PhantomVolume> generate_phantoms(std::uint64_t seed, int n_volumes, int depth, int height, int width,
                                             const PhantomConfig& cfg) {
  if (n_volumes < 1) throw ValueError("generate_phantoms: need at least one volume");
  if (depth < 1 || height < 16 || width < 16)
    throw ValueError("generate_phantoms: degenerate dimensions " + std::to_string(depth) + "x" +
                     std::to_string(height) + "x" + std::to_string(width) + " (need D >= 1, H and W >= 16)");
  if (cfg.min_discs < 1 || cfg.max_discs < cfg.min_discs) throw ConfigError("generate_phantoms: invalid disc count range");
  Rng rng(seed);
  std::vector<PhantomVolume> vols;
  for (int v = 0; v < n_volumes; ++v) {
    Rng vrng = rng.fork(static_cast<std::uint64_t>(v) + 1);
    PhantomVolume pv;
    pv.id = v;
    pv.depth = depth;
    pv.height = height;
    pv.width = width;
    const std::vector<std::uint8_t> lab = make_anatomy(vrng, depth, height, width, cfg);
    pv.mask.resize(lab.size());
    for (std::size_t i = 0; i < lab.size(); ++i) pv.mask[i] = lab[i] == kDisc ? 1 : 0;

    const std::vector<float> base_a = render_base(vrng, lab, depth, height, width, cfg.table_a, cfg.texture_amplitude);
    pv.params_a.noise_sigma = cfg.noise_a;
    pv.params_a.field_seed = vrng.next();
    pv.params_a.noise_seed = vrng.next();
    pv.image_a = modality_transform(base_a, height, width, pv.params_a);

    const std::vector<float> base_b = render_base(vrng, lab, depth, height, width, cfg.table_b, cfg.texture_amplitude);
    pv.params_b.invert = cfg.invert_b;
    pv.params_b.noise_sigma = vrng.uniform(cfg.noise_b_min, cfg.noise_b_max);
    pv.params_b.gamma = vrng.uniform(cfg.gamma_b_min, cfg.gamma_b_max);
    pv.params_b.bias_amplitude = cfg.bias_b;
    pv.params_b.field_seed = vrng.next();
    pv.params_b.noise_seed = vrng.next();
    pv.image_b = modality_transform(base_b, height, width, pv.params_b);
    vols.push_back(std::move(pv));
  }
  return vols;
}

VolumeSplit split(std::span<const int> ids, int train_count, int val_count) {
  if (train_count < 0 || val_count < 0) throw ValueError("split counts must be non-negative");
  if (static_cast<std::size_t>(train_count) + static_cast<std::size_t>(val_count) > ids.size())
    throw ValueError("split asks for " + std::to_string(train_count + val_count) + " volumes but only " +
                     std::to_string(ids.size()) + " exist");
  VolumeSplit s;
  s.train.assign(ids.begin(), ids.begin() + train_count);
  s.val.assign(ids.begin() + train_count, ids.begin() + train_count + val_count);
  return s;
}

Modality parse_modality(const std::string& s) {
  if (s == "A" || s == "a") return Modality::a;
  if (s == "B" || s == "b") return Modality::b;
  throw ConfigError("unknown modality '" + s + "' (expected A or B)");
}

std::string modality_name(Modality m) { return m == Modality::a ? "A" : "B"; }
std::string image_file_name(Modality m) { return "image_mod" + modality_name(m) + ".npy"; }

std::filesystem::path volume_dir(const std::filesystem::path& root, int volume) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "vol_%03d", volume);
  return root / buf;
}

void save_dataset(const std::filesystem::path& root, const std::vector<PhantomVolume>& volumes, std::uint64_t seed,
                  const PhantomConfig& config) {
  if (volumes.empty()) throw ValueError("save_dataset: no volumes");
  nlohmann::json manifest;
  manifest["format"] = "srda-phantoms";
  manifest["version"] = 1;
  manifest["seed"] = seed;
  const PhantomVolume& v0 = volumes.front();
  manifest["shape"] = {v0.depth, v0.height, v0.width};
  manifest["generator"] = to_json(config);
  manifest["volumes"] = nlohmann::json::array();
  for (const PhantomVolume& v : volumes) {
    const auto dir = volume_dir(root, v.id);
    const std::vector<std::size_t> shape = {static_cast<std::size_t>(v.depth), static_cast<std::size_t>(v.height),
                                            static_cast<std::size_t>(v.width)};
    write_npy(dir / image_file_name(Modality::a), v.image_a, shape);
    write_npy(dir / image_file_name(Modality::b), v.image_b, shape);
    write_npy(dir / "mask.npy", v.mask, shape);
    std::vector<bool> tags;
    for (int d = 0; d < v.depth; ++d) tags.push_back(v.slice_has_foreground(d));
    manifest["volumes"].push_back({{"id", v.id},
                                   {"dir", dir.filename().string()},
                                   {"tags", tags},
                                   {"modality_params", {{"A", to_json(v.params_a)}, {"B", to_json(v.params_b)}}}});
  }
  io::write_text(root / "manifest.json", manifest.dump(1) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  if (!std::filesystem::exists(path)) throw IoError("no manifest.json in " + root.string());
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.depth = j.at("shape").at(0).get<int>();
    m.height = j.at("shape").at(1).get<int>();
    m.width = j.at("shape").at(2).get<int>();
    m.generator = j.value("generator", nlohmann::json::object());
    for (const auto& v : j.at("volumes")) {
      m.volumes.push_back(v.at("id").get<int>());
      m.tags.push_back(v.at("tags").get<std::vector<bool>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  return m;
}

namespace {

void check_shape(const NpyArray& a, const DatasetManifest& m, const std::filesystem::path& p) {
  if (a.shape.size() != 3 || static_cast<int>(a.shape[0]) != m.depth || static_cast<int>(a.shape[1]) != m.height ||
      static_cast<int>(a.shape[2]) != m.width)
    throw ShapeError(p.string() + " does not match the manifest shape");
}

}  // namespace

std::vector<SliceSample> load_slices(const std::filesystem::path& root, const DatasetManifest& m,
                                     std::span<const int> volumes, Modality modality, bool with_masks) {
  std::vector<SliceSample> out;
  const std::size_t plane = static_cast<std::size_t>(m.height) * m.width;
  for (int v : volumes) {
    const auto it = std::find(m.volumes.begin(), m.volumes.end(), v);
    if (it == m.volumes.end()) throw ValueError("volume " + std::to_string(v) + " is not in the manifest");
    const auto& tags = m.tags[static_cast<std::size_t>(it - m.volumes.begin())];
    const auto dir = volume_dir(root, v);
    const auto img_path = dir / image_file_name(modality);
    const NpyArray img = read_npy(img_path);
    check_shape(img, m, img_path);
    const std::vector<float> pixels = npy_as_float(img);
    std::vector<std::uint8_t> mask;
    if (with_masks) {
      const auto mask_path = dir / "mask.npy";
      const NpyArray ma = read_npy(mask_path);
      check_shape(ma, m, mask_path);
      mask = npy_as_u8(ma);
    }
    for (int d = 0; d < m.depth; ++d) {
      SliceSample s;
      s.volume = v;
      s.slice = d;
      s.image = Tensor(1, 1, m.height, m.width);
      std::copy(pixels.begin() + static_cast<std::ptrdiff_t>(plane * d),
                pixels.begin() + static_cast<std::ptrdiff_t>(plane * (d + 1)), s.image.data.begin());
      if (with_masks) {
        s.mask = LabelMask(m.height, m.width);
        std::copy(mask.begin() + static_cast<std::ptrdiff_t>(plane * d),
                  mask.begin() + static_cast<std::ptrdiff_t>(plane * (d + 1)), s.mask.values.begin());
        s.has_foreground = std::any_of(s.mask.values.begin(), s.mask.values.end(), [](std::uint8_t x) { return x != 0; });
      } else {
        s.has_foreground = tags.at(static_cast<std::size_t>(d));
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<SliceSample> to_slices(const std::vector<PhantomVolume>& volumes, std::span<const int> ids, Modality modality) {
  std::vector<SliceSample> out;
  for (int id : ids) {
    const auto it = std::find_if(volumes.begin(), volumes.end(), [id](const PhantomVolume& v) { return v.id == id; });
    if (it == volumes.end()) throw ValueError("volume " + std::to_string(id) + " does not exist");
    const std::vector<float>& img = modality == Modality::a ? it->image_a : it->image_b;
    const std::size_t plane = it->slice_size();
    for (int d = 0; d < it->depth; ++d) {
      SliceSample s;
      s.volume = id;
      s.slice = d;
      s.image = Tensor(1, 1, it->height, it->width);
      std::copy(img.begin() + static_cast<std::ptrdiff_t>(plane * d), img.begin() + static_cast<std::ptrdiff_t>(plane * (d + 1)),
                s.image.data.begin());
      s.mask = LabelMask(it->height, it->width);
      std::copy(it->mask.begin() + static_cast<std::ptrdiff_t>(plane * d),
                it->mask.begin() + static_cast<std::ptrdiff_t>(plane * (d + 1)), s.mask.values.begin());
      s.has_foreground = it->slice_has_foreground(d);
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

// Value at slice index s, row r, column c of a (A0, A1, A2) array sliced along axis.
std::size_t strided_index(const std::vector<std::size_t>& shape, int axis, std::size_t s, std::size_t r, std::size_t c) {
  std::size_t idx[3];
  idx[axis] = s;
  int k = 0;
  for (int a = 0; a < 3; ++a) {
    if (a == axis) continue;
    idx[a] = k++ == 0 ? r : c;
  }
  return (idx[0] * shape[1] + idx[1]) * shape[2] + idx[2];
}

template <typename T>
std::vector<T> rotate_quarters(const std::vector<T>& img, int& h, int& w, int quarters) {
  std::vector<T> cur = img;
  for (int q = 0; q < ((quarters % 4) + 4) % 4; ++q) {
    std::vector<T> next(cur.size());
    // counter-clockwise: new(y, x) = old(x, w - 1 - y), new shape (w, h)
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < h; ++x)
        next[static_cast<std::size_t>(y) * h + x] = cur[static_cast<std::size_t>(x) * w + (w - 1 - y)];
    cur.swap(next);
    std::swap(h, w);
  }
  return cur;
}

}  // namespace

std::vector<SliceSample> load_real_slices(const std::filesystem::path& directory, const SliceLayout& layout) {
  if (!std::filesystem::is_directory(directory)) throw IoError(directory.string() + " is not a directory");
  if (layout.axis < 0 || layout.axis > 2) throw ConfigError("slice axis must be 0, 1 or 2");
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(directory))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<SliceSample> out;
  int volume = 0;
  for (const auto& dir : dirs) {
    const auto img_path = dir / layout.image_name;
    const auto mask_path = dir / layout.mask_name;
    if (!std::filesystem::exists(img_path)) continue;
    if (!std::filesystem::exists(mask_path)) throw IoError("image " + img_path.string() + " has no mask " + mask_path.string());
    NpyArray img = read_npy(img_path);
    NpyArray msk = read_npy(mask_path);
    if (img.shape != msk.shape) throw ShapeError("image and mask shapes differ in " + dir.string());
    const bool planar = img.shape.size() == 2;
    if (planar) {
      img.shape.insert(img.shape.begin(), 1);
      msk.shape.insert(msk.shape.begin(), 1);
    }
    if (img.shape.size() != 3) throw ShapeError(img_path.string() + " must be 2D or 3D");
    const std::vector<float> pixels = npy_as_float(img);
    const std::vector<std::uint8_t> labels = npy_as_u8(msk);
    const auto [lo, hi] = std::minmax_element(pixels.begin(), pixels.end());
    const float range = pixels.empty() ? 0.0f : *hi - *lo;
    const int axis = planar ? 0 : layout.axis;
    const std::size_t n_slices = img.shape[static_cast<std::size_t>(axis)];
    std::vector<std::size_t> rest;
    for (int a = 0; a < 3; ++a)
      if (a != axis) rest.push_back(img.shape[static_cast<std::size_t>(a)]);
    for (std::size_t s = 0; s < n_slices; ++s) {
      std::vector<float> im(rest[0] * rest[1]);
      std::vector<std::uint8_t> mk(im.size());
      for (std::size_t r = 0; r < rest[0]; ++r)
        for (std::size_t c = 0; c < rest[1]; ++c) {
          const std::size_t src = strided_index(img.shape, axis, s, r, c);
          im[r * rest[1] + c] = range > 0.0f ? (pixels[src] - *lo) / range : 0.0f;
          mk[r * rest[1] + c] = labels[src];
        }
      int h = static_cast<int>(rest[0]);
      int w = static_cast<int>(rest[1]);
      int mh = h;
      int mw = w;
      im = rotate_quarters(im, h, w, layout.rotate_quarters);
      mk = rotate_quarters(mk, mh, mw, layout.rotate_quarters);
      SliceSample sample;
      sample.volume = volume;
      sample.slice = static_cast<int>(s);
      sample.image = Tensor(1, 1, h, w);
      sample.image.data = std::move(im);
      sample.mask = LabelMask(h, w);
      sample.mask.values = std::move(mk);
      sample.has_foreground =
          std::any_of(sample.mask.values.begin(), sample.mask.values.end(), [](std::uint8_t x) { return x != 0; });
      out.push_back(std::move(sample));
    }
    ++volume;
  }
  if (out.empty()) std::cerr << "warning: no volumes found in " << directory.string() << "\n";
  return out;
}

Tensor stack_images(std::span<const SliceSample> samples, std::span<const int> indices) {
  if (indices.empty()) throw ValueError("stack_images: no indices");
  const Tensor& first = samples[static_cast<std::size_t>(indices.front())].image;
  Tensor out(static_cast<int>(indices.size()), 1, first.h, first.w);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const Tensor& img = samples[static_cast<std::size_t>(indices[j])].image;
    if (img.h != first.h || img.w != first.w) throw ShapeError("stack_images: mixed slice sizes");
    std::copy(img.data.begin(), img.data.end(), out.image(static_cast<int>(j)));
  }
  return out;
}

}  // namespace srda
