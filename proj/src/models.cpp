#include "srda/models.hpp"

#include <cstring>

#include "srda/errors.hpp"
#include "srda/io.hpp"
#include "srda/kernels.hpp"

namespace srda {

SegModel::SegModel(const SegModelConfig& config) : config_(config) {
  if (config.classes < 2) throw ConfigError("segmentation model needs K >= 2, got " + std::to_string(config.classes));
  if (config.width < 1 || config.levels < 1) throw ConfigError("segmentation model width and levels must be positive");
  std::vector<int> ch;
  for (int l = 0; l < config.levels; ++l) ch.push_back(config.width << l);
  int cin = 1;
  for (int l = 0; l < config.levels; ++l) {
    const std::string name = "enc" + std::to_string(l);
    encoder_.push_back(Level{ConvBlock(name + ".a", cin, ch[l]), ConvBlock(name + ".b", ch[l], ch[l]), {}});
    cin = ch[l];
  }
  for (int l = config.levels - 2; l >= 0; --l) {
    const std::string name = "dec" + std::to_string(l);
    decoder_.push_back(Up{ConvBlock(name + ".a", ch[l + 1] + ch[l], ch[l]), ConvBlock(name + ".b", ch[l], ch[l]), ch[l]});
  }
  head_ = Conv2d("head", ConvShape{ch[0], config.classes, 1});

  Rng rng(config.seed);
  for (Level& lv : encoder_) {
    lv.a.init(rng);
    lv.b.init(rng);
  }
  for (Up& up : decoder_) {
    up.a.init(rng);
    up.b.init(rng);
  }
  head_.init(rng);
}

Tensor SegModel::forward(const Tensor& images, Mode mode) {
  const int factor = 1 << (config_.levels - 1);
  if (images.c != 1) throw ShapeError("segmentation input must have one channel, got " + images.shape_string());
  if (images.h % factor != 0 || images.w % factor != 0 || images.h == 0 || images.w == 0)
    throw ShapeError("segmentation input " + images.shape_string() + " is not divisible by " + std::to_string(factor));
  std::vector<Tensor> skips;
  Tensor x = images;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    if (l > 0) x = encoder_[l].pool.forward(x);
    x = encoder_[l].b.forward(encoder_[l].a.forward(x, mode), mode);
    if (l + 1 < encoder_.size()) skips.push_back(x);
  }
  for (Up& up : decoder_) {
    Tensor u;
    kernels::upsample2_forward(x, u);
    Tensor cat;
    kernels::concat_channels(u, skips.back(), cat);
    skips.pop_back();
    x = up.b.forward(up.a.forward(cat, mode), mode);
  }
  return head_.forward(x);
}

void SegModel::backward(const Tensor& dlogits) {
  Tensor g = head_.backward(dlogits);
  // decoder stage j consumed the skip of encoder level (levels - 2 - j)
  std::vector<Tensor> skip_grads(encoder_.size());
  for (std::size_t j = decoder_.size(); j-- > 0;) {
    Up& up = decoder_[j];
    Tensor dcat = up.a.backward(up.b.backward(g));
    Tensor du;
    kernels::split_channels(dcat, dcat.c - up.skip_channels, du, skip_grads[encoder_.size() - 2 - j]);
    kernels::upsample2_backward(du, g);
  }
  for (std::size_t l = encoder_.size(); l-- > 0;) {
    if (l + 1 < encoder_.size()) {
      const Tensor& s = skip_grads[l];
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += s.data[i];
    }
    g = encoder_[l].a.backward(encoder_[l].b.backward(g), l > 0);
    if (l > 0) g = encoder_[l].pool.backward(g);
  }
}

std::vector<Param*> SegModel::parameters() {
  std::vector<Param*> p;
  std::vector<Buffer> b;
  for (Level& lv : encoder_) {
    lv.a.collect(p, b);
    lv.b.collect(p, b);
  }
  for (Up& up : decoder_) {
    up.a.collect(p, b);
    up.b.collect(p, b);
  }
  p.push_back(&head_.weight);
  p.push_back(&head_.bias);
  return p;
}

std::vector<Buffer> SegModel::buffers() {
  std::vector<Param*> p;
  std::vector<Buffer> b;
  for (Level& lv : encoder_) {
    lv.a.collect(p, b);
    lv.b.collect(p, b);
  }
  for (Up& up : decoder_) {
    up.a.collect(p, b);
    up.b.collect(p, b);
  }
  return b;
}

std::size_t SegModel::parameter_count() {
  std::size_t n = 0;
  for (Param* p : parameters()) n += p->value.size();
  return n;
}

SegModel build_seg_model(int classes, int width, std::uint64_t seed, int levels) {
  return SegModel(SegModelConfig{classes, width, levels, seed});
}

std::vector<ProbMap> to_probmaps(const Tensor& logits) {
  std::vector<ProbMap> out;
  out.reserve(static_cast<std::size_t>(logits.n));
  for (int i = 0; i < logits.n; ++i)
    out.push_back(softmax(std::span<const float>(logits.image(i), logits.image_size()), logits.c, logits.h, logits.w));
  return out;
}

Tensor logits_gradient(const std::vector<ProbMap>& probs, const std::vector<std::vector<double>>& grads) {
  if (probs.empty() || probs.size() != grads.size()) throw ShapeError("logits_gradient: batch size mismatch");
  const ProbMap& p0 = probs.front();
  Tensor g(static_cast<int>(probs.size()), p0.k, p0.h, p0.w);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const std::vector<double> dl = softmax_backward(probs[i], grads[i]);
    float* dst = g.image(static_cast<int>(i));
    for (std::size_t j = 0; j < dl.size(); ++j) dst[j] = static_cast<float>(dl[j]);
  }
  return g;
}

ProbMap segment(SegModel& model, const Tensor& image) {
  if (image.n != 1) throw ShapeError("segment expects a single image, got " + image.shape_string());
  return segment_batch(model, image, Mode::eval).front();
}

std::vector<ProbMap> segment_batch(SegModel& model, const Tensor& images, Mode mode) {
  return to_probmaps(model.forward(images, mode));
}

RatioNet::RatioNet(const RatioNetConfig& config) : config_(config) {
  if (config.classes < 2) throw ConfigError("ratio regressor needs K >= 2");
  const int w = config.width;
  const int widths[] = {w, 2 * w, 4 * w, 4 * w};
  int cin = 1;
  for (int l = 0; l < 4; ++l) {
    convs_.emplace_back("conv" + std::to_string(l), ConvShape{cin, widths[l], 3});
    cin = widths[l];
  }
  pools_.resize(3);
  outputs_.resize(4);
  head_ = Conv2d("fc", ConvShape{cin, config.classes, 1});
  Rng rng(config.seed);
  for (Conv2d& c : convs_) c.init(rng);
  head_.init(rng);
}

Tensor RatioNet::forward(const Tensor& images) {
  if (images.c != 1 || images.h < 8 || images.w < 8)
    throw ShapeError("ratio regressor input must be (n,1,H,W) with H,W >= 8, got " + images.shape_string());
  Tensor x = images;
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    x = convs_[l].forward(x);
    kernels::relu_inplace(x);
    outputs_[l] = x;
    if (l < pools_.size()) x = pools_[l].forward(x);
  }
  last_h_ = x.h;
  last_w_ = x.w;
  Tensor pooled;
  kernels::global_avg_pool(x, pooled);
  return head_.forward(pooled);
}

void RatioNet::backward(const Tensor& dout) {
  Tensor g = head_.backward(dout);
  Tensor d;
  kernels::global_avg_pool_backward(g, last_h_, last_w_, d);
  for (std::size_t l = convs_.size(); l-- > 0;) {
    if (l < pools_.size()) d = pools_[l].backward(d);
    kernels::relu_backward_inplace(outputs_[l], d);
    d = convs_[l].backward(d, l > 0);
  }
}

std::vector<Param*> RatioNet::parameters() {
  std::vector<Param*> p;
  for (Conv2d& c : convs_) {
    p.push_back(&c.weight);
    p.push_back(&c.bias);
  }
  p.push_back(&head_.weight);
  p.push_back(&head_.bias);
  return p;
}

std::size_t RatioNet::parameter_count() {
  std::size_t n = 0;
  for (Param* p : parameters()) n += p->value.size();
  return n;
}

std::string config_hash(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json to_json(const CheckpointMeta& m) {
  return {{"kind", m.kind},       {"classes", m.classes},         {"width", m.width},
          {"levels", m.levels},   {"seed", m.seed},               {"epoch", m.epoch},
          {"config_hash", m.config_hash}, {"input_shape", {1, m.input_h, m.input_w}},
          {"extra", m.extra}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta m;
  try {
    m.kind = j.at("kind").get<std::string>();
    m.classes = j.at("classes").get<int>();
    m.width = j.at("width").get<int>();
    m.levels = j.at("levels").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.epoch = j.at("epoch").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    const auto& shape = j.at("input_shape");
    m.input_h = shape.at(1).get<int>();
    m.input_w = shape.at(2).get<int>();
    m.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header is malformed: ") + e.what());
  }
  return m;
}

namespace {

constexpr char kMagic[8] = {'S', 'R', 'D', 'A', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  void put_floats(const std::vector<float>& v) {
    put<std::uint64_t>(v.size());
    put_bytes(v.data(), v.size() * sizeof(float));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end, std::string path)
      : bytes_(b), end_(end), path_(std::move(path)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<float> get_floats() {
    const auto n = get<std::uint64_t>();
    if (n > (end_ - pos_) / sizeof(float)) fail();
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) {
    if (n > end_ - pos_) fail();
  }
  [[noreturn]] void fail() { throw IoError("checkpoint is truncated: " + path_); }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
  std::size_t end_;
  std::string path_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data) {
  Writer w;
  w.put_bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string header = to_json(data.meta).dump();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.put_bytes(header.data(), header.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(data.tensors.size()));
  for (const NamedTensor& t : data.tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put_floats(t.values);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(data.optimizer_state.size()));
  for (const auto& s : data.optimizer_state) w.put_floats(s);
  w.put<std::uint64_t>(fnv1a(w.bytes.data(), w.bytes.size()));
  io::write_bytes(path, w.bytes);

  nlohmann::json side = to_json(data.meta);
  side["format_version"] = kCheckpointVersion;
  side["tensors"] = data.tensors.size();
  side["has_optimizer_state"] = !data.optimizer_state.empty();
  auto sidecar = path;
  sidecar += ".json";
  io::write_text(sidecar, side.dump(2) + "\n");
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = io::read_bytes(path);
  const std::string name = path.string();
  if (bytes.size() < sizeof kMagic + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file: " + name);
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  Reader r(bytes, body, name);
  r.get_string(sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + "): " + name);
  if (stored != fnv1a(bytes.data(), body)) throw IoError("checkpoint checksum mismatch: " + name);
  CheckpointData data;
  const auto header_size = r.get<std::uint32_t>();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.get_string(header_size));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint header is not valid JSON: " + name);
  }
  data.meta = meta_from_json(header);
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string(r.get<std::uint32_t>());
    t.values = r.get_floats();
    data.tensors.push_back(std::move(t));
  }
  const auto opt_count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < opt_count; ++i) data.optimizer_state.push_back(r.get_floats());
  if (!r.done()) throw IoError("checkpoint has trailing data: " + name);
  return data;
}

std::vector<NamedTensor> snapshot(SegModel& model) {
  std::vector<NamedTensor> out;
  for (Param* p : model.parameters()) out.push_back({p->name, p->value});
  for (const Buffer& b : model.buffers()) out.push_back({b.name, *b.values});
  return out;
}

void restore(SegModel& model, const std::vector<NamedTensor>& tensors) {
  std::size_t i = 0;
  auto take = [&](const std::string& name, std::vector<float>& dst) {
    if (i >= tensors.size() || tensors[i].name != name || tensors[i].values.size() != dst.size())
      throw ConfigError("checkpoint tensors do not match the model at '" + name + "'");
    dst = tensors[i++].values;
  };
  for (Param* p : model.parameters()) take(p->name, p->value);
  for (const Buffer& b : model.buffers()) take(b.name, *b.values);
  if (i != tensors.size()) throw ConfigError("checkpoint has more tensors than the model");
}

void save_checkpoint(SegModel& model, const std::filesystem::path& path, const CheckpointMeta& meta,
                     const Adam* optimizer) {
  CheckpointData data;
  data.meta = meta;
  data.meta.kind = "seg";
  data.meta.classes = model.config().classes;
  data.meta.width = model.config().width;
  data.meta.levels = model.config().levels;
  data.meta.seed = model.config().seed;
  data.tensors = snapshot(model);
  if (optimizer) data.optimizer_state = optimizer->state();
  write_checkpoint(path, data);
}

SegCheckpoint load_seg_checkpoint(const std::filesystem::path& path, std::optional<int> expected_classes) {
  CheckpointData data = read_checkpoint(path);
  if (data.meta.kind != "seg") throw ConfigError(path.string() + " holds a '" + data.meta.kind + "' model, not a segmentation model");
  if (expected_classes && *expected_classes != data.meta.classes)
    throw ConfigError("checkpoint has K=" + std::to_string(data.meta.classes) + " but K=" +
                      std::to_string(*expected_classes) + " was requested");
  SegModel model(SegModelConfig{data.meta.classes, data.meta.width, data.meta.levels, data.meta.seed});
  restore(model, data.tensors);
  return SegCheckpoint{std::move(model), data.meta, std::move(data.optimizer_state)};
}

void save_checkpoint(RatioNet& model, const std::filesystem::path& path, const CheckpointMeta& meta) {
  CheckpointData data;
  data.meta = meta;
  data.meta.kind = "ratio";
  data.meta.classes = model.config().classes;
  data.meta.width = model.config().width;
  data.meta.levels = 4;
  data.meta.seed = model.config().seed;
  for (Param* p : model.parameters()) data.tensors.push_back({p->name, p->value});
  write_checkpoint(path, data);
}

RatioCheckpoint load_ratio_checkpoint(const std::filesystem::path& path) {
  CheckpointData data = read_checkpoint(path);
  if (data.meta.kind != "ratio") throw ConfigError(path.string() + " holds a '" + data.meta.kind + "' model, not a ratio regressor");
  RatioNet model(RatioNetConfig{data.meta.classes, data.meta.width, data.meta.seed});
  auto params = model.parameters();
  if (params.size() != data.tensors.size()) throw ConfigError("ratio checkpoint does not match the regressor architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->name != data.tensors[i].name || params[i]->value.size() != data.tensors[i].values.size())
      throw ConfigError("ratio checkpoint does not match the regressor at '" + params[i]->name + "'");
    params[i]->value = data.tensors[i].values;
  }
  return RatioCheckpoint{std::move(model), data.meta};
}

}  // namespace srda
