#include "srda/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "srda/errors.hpp"
#include "srda/io.hpp"

namespace srda {

std::string method_name(Method m) {
  switch (m) {
    case Method::no_adapt: return "no_adapt";
    case Method::adaent: return "adaent";
    case Method::adasource: return "adasource";
    case Method::oracle: return "oracle";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "no_adapt") return Method::no_adapt;
  if (s == "adaent") return Method::adaent;
  if (s == "adasource") return Method::adasource;
  if (s == "oracle") return Method::oracle;
  throw ConfigError("unknown method '" + s + "'");
}

nlohmann::json to_json(const AdaptConfig& c) {
  return {{"method", method_name(c.method)},
          {"lambda", c.lambda},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"classes", c.classes},
          {"width", c.width},
          {"source", c.source_path.string()},
          {"target", c.target_path.string()},
          {"init", c.init_checkpoint.string()},
          {"regressor", c.regressor_checkpoint.string()},
          {"source_modality", modality_name(c.source_modality)},
          {"target_modality", modality_name(c.target_modality)},
          {"train_volumes", c.train_volumes},
          {"val_volumes", c.val_volumes},
          {"run_id", c.run_id}};
}

std::string config_hash(const AdaptConfig& c) {
  nlohmann::json j = to_json(c);
  for (const char* k : {"source", "target", "init", "regressor", "run_id"}) j.erase(k);
  return config_hash(j.dump());
}

void check_contract(const AdaptConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (c.batch_size < 1) throw ConfigError("batch size must be positive");
  if (c.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (c.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (c.train_volumes < 1 || c.val_volumes < 1) throw ConfigError("need at least one training and one validation volume");
  switch (c.method) {
    case Method::adaent:
      if (!c.source_path.empty())
        throw ConfigError("adaptation is source-free: a source dataset path is not accepted");
      if (c.init_checkpoint.empty()) throw ConfigError("adaptation needs an initial checkpoint");
      if (c.regressor_checkpoint.empty()) throw ConfigError("adaptation needs a ratio regressor checkpoint");
      if (c.target_path.empty()) throw ConfigError("adaptation needs a target dataset");
      break;
    case Method::adasource:
      if (c.source_path.empty() || c.target_path.empty())
        throw ConfigError("the source-plus-ratio benchmark needs both a source and a target dataset");
      if (c.init_checkpoint.empty()) throw ConfigError("the source-plus-ratio benchmark needs an initial checkpoint");
      if (c.regressor_checkpoint.empty()) throw ConfigError("the source-plus-ratio benchmark needs a ratio regressor checkpoint");
      break;
    case Method::oracle:
      if (c.target_path.empty()) throw ConfigError("oracle training needs a labelled target dataset");
      break;
    case Method::no_adapt:
      break;
  }
}

EvalSummary evaluate(SegModel& model, std::span<const SliceSample> slices, int cls) {
  if (slices.empty()) throw ValueError("evaluate: no slices");
  std::vector<ProbMap> probs;
  probs.reserve(slices.size());
  const std::size_t chunk = 16;
  std::vector<int> ids;
  for (std::size_t start = 0; start < slices.size(); start += chunk) {
    const std::size_t end = std::min(slices.size(), start + chunk);
    ids.clear();
    for (std::size_t i = start; i < end; ++i) ids.push_back(static_cast<int>(i));
    for (ProbMap& p : segment_batch(model, stack_images(slices, ids), Mode::eval)) probs.push_back(std::move(p));
  }
  return evaluate_predictions(probs, slices, cls);
}

EvalSummary evaluate_predictions(std::span<const ProbMap> probs, std::span<const SliceSample> slices, int cls) {
  if (slices.empty()) throw ValueError("evaluate: no slices");
  if (probs.size() != slices.size()) throw ShapeError("evaluate: one prediction per slice is required");
  std::vector<SliceScore> scores;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const SliceSample& s = slices[j];
    if (s.mask.pixels() != probs[j].pixels() || s.mask.h != probs[j].h)
      throw ShapeError("evaluate: slice " + std::to_string(j) + " has no matching mask");
    if (cls >= probs[j].k) throw ConfigError("evaluate: class index exceeds the model's classes");
    SliceScore sc;
    sc.volume = s.volume;
    const LabelMask pred = argmax_mask(probs[j]);
    sc.has_foreground = std::any_of(s.mask.values.begin(), s.mask.values.end(),
                                    [cls](std::uint8_t v) { return v == cls; });
    sc.dsc = dice(pred, s.mask, cls);
    sc.hd = hausdorff(pred, s.mask, cls);
    const std::vector<double> e = entropy_map(probs[j]);
    double se = 0.0;
    for (double v : e) se += v;
    sc.entropy = se / static_cast<double>(e.size());
    sc.foreground_ratio = predicted_ratio(probs[j])[static_cast<std::size_t>(cls)];
    scores.push_back(sc);
  }
  EvalSummary out;
  out.volumes = aggregate_volumes(scores);
  std::vector<double> d;
  std::vector<double> h;
  for (const VolumeScore& v : out.volumes) {
    if (v.scored_slices == 0) continue;
    d.push_back(v.dsc);
    h.push_back(v.hd);
  }
  out.dsc = mean_std(d);
  out.hd = mean_std(h);
  for (const SliceScore& s : scores) {
    out.entropy += s.entropy;
    out.foreground_ratio += s.foreground_ratio;
  }
  out.entropy /= static_cast<double>(scores.size());
  out.foreground_ratio /= static_cast<double>(scores.size());
  return out;
}

const EpochRecord& RunRecord::best() const {
  for (const EpochRecord& e : epochs)
    if (e.epoch == best_epoch) return e;
  throw ValueError("run record has no entry for its best epoch");
}

namespace {

nlohmann::json eval_json(const EvalSummary& s) {
  nlohmann::json vols = nlohmann::json::array();
  for (const VolumeScore& v : s.volumes)
    vols.push_back({{"volume", v.volume}, {"dsc", v.dsc}, {"hd", v.hd}, {"entropy", v.entropy},
                    {"foreground_ratio", v.foreground_ratio}, {"scored_slices", v.scored_slices}});
  return {{"dsc_mean", s.dsc.mean}, {"dsc_std", s.dsc.std}, {"hd_mean", s.hd.mean}, {"hd_std", s.hd.std},
          {"entropy", s.entropy},   {"foreground_ratio", s.foreground_ratio}, {"volumes", vols}};
}

EvalSummary eval_from_json(const nlohmann::json& j) {
  EvalSummary s;
  s.dsc = {j.at("dsc_mean").get<double>(), j.at("dsc_std").get<double>()};
  s.hd = {j.at("hd_mean").get<double>(), j.at("hd_std").get<double>()};
  s.entropy = j.at("entropy").get<double>();
  s.foreground_ratio = j.at("foreground_ratio").get<double>();
  for (const auto& v : j.at("volumes")) {
    VolumeScore vs;
    vs.volume = v.at("volume").get<int>();
    vs.dsc = v.at("dsc").get<double>();
    vs.hd = v.at("hd").get<double>();
    vs.entropy = v.at("entropy").get<double>();
    vs.foreground_ratio = v.at("foreground_ratio").get<double>();
    vs.scored_slices = v.at("scored_slices").get<int>();
    s.volumes.push_back(vs);
  }
  return s;
}

}  // namespace

nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const EpochRecord& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"entropy", e.entropy}, {"kl", e.kl}, {"ce", e.ce},
                      {"seconds", e.seconds}, {"val", eval_json(e.val)}});
  return {{"run_id", r.run_id},
          {"method", method_name(r.method)},
          {"seed", r.seed},
          {"lambda", r.lambda},
          {"best_epoch", r.best_epoch},
          {"last_epoch", r.epochs.empty() ? 0 : r.epochs.back().epoch},
          {"wall_seconds", r.wall_seconds},
          {"config", r.config},
          {"epochs", epochs}};
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.run_id = j.at("run_id").get<std::string>();
    r.method = parse_method(j.at("method").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.lambda = j.at("lambda").get<double>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.config = j.value("config", nlohmann::json::object());
    for (const auto& e : j.at("epochs")) {
      EpochRecord er;
      er.epoch = e.at("epoch").get<int>();
      er.loss = e.at("loss").get<double>();
      er.entropy = e.at("entropy").get<double>();
      er.kl = e.at("kl").get<double>();
      er.ce = e.at("ce").get<double>();
      er.seconds = e.at("seconds").get<double>();
      er.val = eval_from_json(e.at("val"));
      r.epochs.push_back(std::move(er));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

void write_run_record(const RunRecord& r, const std::filesystem::path& dir) {
  if (r.run_id.empty()) throw ConfigError("run record needs a run id");
  io::write_text(dir / (r.run_id + ".json"), to_json(r).dump(1) + "\n");
  std::ostringstream csv;
  csv.precision(10);
  csv << "run_id,method,epoch,loss,entropy,kl,ce,val_dsc,val_dsc_std,val_hd,val_hd_std,val_entropy,val_fg_ratio,seconds\n";
  for (const EpochRecord& e : r.epochs)
    csv << r.run_id << ',' << method_name(r.method) << ',' << e.epoch << ',' << e.loss << ',' << e.entropy << ','
        << e.kl << ',' << e.ce << ',' << e.val.dsc.mean << ',' << e.val.dsc.std << ',' << e.val.hd.mean << ','
        << e.val.hd.std << ',' << e.val.entropy << ',' << e.val.foreground_ratio << ',' << e.seconds << '\n';
  io::write_text(dir / (r.run_id + ".csv"), csv.str());
  std::ostringstream vcsv;
  vcsv.precision(10);
  vcsv << "run_id,method,epoch,volume,dsc,hd\n";
  for (const EpochRecord& e : r.epochs)
    for (const VolumeScore& v : e.val.volumes)
      vcsv << r.run_id << ',' << method_name(r.method) << ',' << e.epoch << ',' << v.volume << ',' << v.dsc << ','
           << v.hd << '\n';
  io::write_text(dir / (r.run_id + "_volumes.csv"), vcsv.str());
}

RunRecord read_run_record(const std::filesystem::path& json_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(json_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError("cannot parse " + json_path.string() + ": " + e.what());
  }
  return run_record_from_json(j);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::vector<std::vector<int>> make_batches(Rng& rng, int n, int batch_size) {
  const std::vector<int> perm = rng.permutation(n);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size)
    batches.emplace_back(perm.begin() + start, perm.begin() + std::min(n, start + batch_size));
  return batches;
}

void check_options(const LoopOptions& o) {
  if (o.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (o.batch_size < 1) throw ConfigError("batch size must be positive");
  if (o.lr <= 0.0) throw ConfigError("learning rate must be positive");
  if (o.lambda < 0.0) throw ConfigError("lambda must be non-negative");
}

void require_masks(std::span<const SliceSample> s, const char* what) {
  for (const SliceSample& x : s)
    if (x.mask.pixels() == 0) throw ValueError(std::string(what) + " slices need masks");
}

// Shared epoch bookkeeping: initial evaluation, best-val snapshot, records.
class Tracker {
 public:
  Tracker(SegModel& model, std::span<const SliceSample> val, Method method, const LoopOptions& o)
      : model_(model), val_(val), options_(o), start_(Clock::now()) {
    record.method = method;
    record.seed = o.seed;
    record.lambda = o.lambda;
    EpochRecord e;
    e.epoch = 0;
    e.val = evaluate(model_, val_);
    best_dsc_ = e.val.dsc.mean;
    best_ = snapshot(model_);
    push(std::move(e));
  }

  void finish_epoch(EpochRecord e, Clock::time_point epoch_start) {
    e.val = evaluate(model_, val_);
    e.seconds = seconds_since(epoch_start);
    if (e.val.dsc.mean > best_dsc_) {
      best_dsc_ = e.val.dsc.mean;
      best_ = snapshot(model_);
      record.best_epoch = e.epoch;
    }
    push(std::move(e));
  }

  TrainResult finish() {
    restore(model_, best_);
    record.wall_seconds = seconds_since(start_);
    return TrainResult{std::move(model_), std::move(record)};
  }

  RunRecord record;

 private:
  void push(EpochRecord e) {
    if (!std::isfinite(e.loss) || !std::isfinite(e.entropy) || !std::isfinite(e.kl) || !std::isfinite(e.ce))
      throw ValueError("non-finite loss at epoch " + std::to_string(e.epoch));
    if (options_.on_epoch) options_.on_epoch(e);
    record.epochs.push_back(std::move(e));
  }

  SegModel& model_;
  std::span<const SliceSample> val_;
  const LoopOptions& options_;
  Clock::time_point start_;
  double best_dsc_ = 0.0;
  std::vector<NamedTensor> best_;
};

std::vector<ProbMap> forward_probs(SegModel& model, std::span<const SliceSample> s, const std::vector<int>& ids) {
  return to_probmaps(model.forward(stack_images(s, ids), Mode::train));
}

void scale_terms(EpochRecord& e, int batches) {
  if (batches == 0) return;
  e.loss /= batches;
  e.entropy /= batches;
  e.kl /= batches;
  e.ce /= batches;
}

}  // namespace

TrainResult train_supervised(SegModel model, std::span<const SliceSample> train, std::span<const SliceSample> val,
                             const LoopOptions& o, Method method) {
  check_options(o);
  if (train.empty()) throw ValueError("train_supervised: empty training set");
  require_masks(train, "training");
  require_masks(val, "validation");
  Tracker tracker(model, val, method, o);
  auto params = model.parameters();
  Adam opt(params, AdamConfig{o.lr});
  Rng rng = Rng(o.seed).fork(11);
  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord e;
    e.epoch = epoch;
    int nb = 0;
    for (const auto& ids : make_batches(rng, static_cast<int>(train.size()), o.batch_size)) {
      zero_grad(params);
      const std::vector<ProbMap> probs = forward_probs(model, train, ids);
      std::vector<LabelMask> masks;
      for (int i : ids) masks.push_back(train[static_cast<std::size_t>(i)].mask);
      const BatchLoss loss = batch_cross_entropy(probs, masks);
      model.backward(logits_gradient(probs, loss.grads));
      opt.step();
      e.loss += loss.value;
      e.ce += loss.terms.ce;
      ++nb;
    }
    scale_terms(e, nb);
    tracker.finish_epoch(std::move(e), t0);
  }
  return tracker.finish();
}

TrainResult adapt_entropy(SegModel model, std::span<const SliceSample> target, std::span<const ClassRatio> priors,
                          std::span<const SliceSample> val, const LoopOptions& o) {
  check_options(o);
  if (target.empty()) throw ValueError("adapt_entropy: empty target set");
  if (priors.size() != target.size()) throw ShapeError("adapt_entropy: one prior per target slice is required");
  require_masks(val, "validation");
  Tracker tracker(model, val, Method::adaent, o);
  auto params = model.parameters();
  Adam opt(params, AdamConfig{o.lr});
  Rng rng = Rng(o.seed).fork(12);
  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord e;
    e.epoch = epoch;
    int nb = 0;
    for (const auto& ids : make_batches(rng, static_cast<int>(target.size()), o.batch_size)) {
      zero_grad(params);
      const std::vector<ProbMap> probs = forward_probs(model, target, ids);
      std::vector<ClassRatio> batch_priors;
      for (int i : ids) batch_priors.push_back(priors[static_cast<std::size_t>(i)]);
      const BatchLoss loss = batch_adaptation_loss(probs, batch_priors, o.lambda);
      model.backward(logits_gradient(probs, loss.grads));
      opt.step();
      e.loss += loss.value;
      e.entropy += loss.terms.entropy;
      if (o.lambda > 0.0) e.kl += loss.terms.kl;
      ++nb;
    }
    scale_terms(e, nb);
    tracker.finish_epoch(std::move(e), t0);
  }
  return tracker.finish();
}

TrainResult adasource(SegModel model, std::span<const SliceSample> source, std::span<const SliceSample> target,
                      std::span<const ClassRatio> priors, std::span<const SliceSample> val, const LoopOptions& o) {
  check_options(o);
  if (source.empty() || target.empty()) throw ValueError("adasource: both domains need slices");
  if (priors.size() != target.size()) throw ShapeError("adasource: one prior per target slice is required");
  require_masks(source, "source");
  require_masks(val, "validation");
  Tracker tracker(model, val, Method::adasource, o);
  auto params = model.parameters();
  Adam opt(params, AdamConfig{o.lr});
  Rng root(o.seed);
  Rng target_rng = root.fork(13);
  Rng source_rng = root.fork(14);
  for (int epoch = 1; epoch <= o.epochs; ++epoch) {
    const auto t0 = Clock::now();
    EpochRecord e;
    e.epoch = epoch;
    const auto tb = make_batches(target_rng, static_cast<int>(target.size()), o.batch_size);
    const auto sb = make_batches(source_rng, static_cast<int>(source.size()), o.batch_size);
    const std::size_t steps = std::min(tb.size(), sb.size());
    for (std::size_t s = 0; s < steps; ++s) {
      zero_grad(params);
      const std::vector<ProbMap> sp = forward_probs(model, source, sb[s]);
      std::vector<LabelMask> masks;
      for (int i : sb[s]) masks.push_back(source[static_cast<std::size_t>(i)].mask);
      const BatchLoss ce = batch_cross_entropy(sp, masks);
      model.backward(logits_gradient(sp, ce.grads));

      double kl_value = 0.0;
      double kl_term = 0.0;
      if (o.lambda > 0.0) {
        const std::vector<ProbMap> tp = forward_probs(model, target, tb[s]);
        std::vector<ClassRatio> batch_priors;
        for (int i : tb[s]) batch_priors.push_back(priors[static_cast<std::size_t>(i)]);
        const BatchLoss kl = batch_kl_loss(tp, batch_priors, o.lambda);
        model.backward(logits_gradient(tp, kl.grads));
        kl_value = kl.value;
        kl_term = kl.terms.kl;
      }
      opt.step();
      e.loss += ce.value + kl_value;
      e.ce += ce.terms.ce;
      e.kl += kl_term;
    }
    scale_terms(e, static_cast<int>(steps));
    tracker.finish_epoch(std::move(e), t0);
  }
  return tracker.finish();
}

namespace {

struct Split {
  DatasetManifest manifest;
  VolumeSplit volumes;
};

Split open_split(const std::filesystem::path& root, const AdaptConfig& c) {
  Split s;
  s.manifest = load_manifest(root);
  s.volumes = split(s.manifest.volumes, c.train_volumes, c.val_volumes);
  return s;
}

LoopOptions loop_options(const AdaptConfig& c, const std::function<void(const EpochRecord&)>& on_epoch) {
  LoopOptions o;
  o.lr = c.lr;
  o.epochs = c.epochs;
  o.batch_size = c.batch_size;
  o.lambda = c.method == Method::adaent || c.method == Method::adasource ? c.lambda : 0.0;
  o.seed = c.seed;
  o.on_epoch = on_epoch;
  return o;
}

SegModel initial_model(const AdaptConfig& c, bool required) {
  if (!c.init_checkpoint.empty()) return load_seg_checkpoint(c.init_checkpoint, c.classes).model;
  if (required) throw ConfigError(method_name(c.method) + " needs an initial checkpoint");
  return build_seg_model(c.classes, c.width, c.seed);
}

std::vector<ClassRatio> target_priors(const AdaptConfig& c, std::span<const SliceSample> target) {
  RatioCheckpoint rc = load_ratio_checkpoint(c.regressor_checkpoint);
  if (rc.meta.classes != c.classes) throw ConfigError("regressor and segmentation class counts differ");
  RatioRegressor reg(std::move(rc.model), rc.meta.input_h, rc.meta.input_w);
  return estimate_priors(reg, target);
}

TrainResult finalize(TrainResult r, const AdaptConfig& c) {
  r.record.run_id = c.run_id.empty() ? method_name(c.method) + "_seed" + std::to_string(c.seed) : c.run_id;
  r.record.config = to_json(c);
  r.record.lambda = c.method == Method::adaent || c.method == Method::adasource ? c.lambda : 0.0;
  return r;
}

}  // namespace

TrainResult train_source(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  AdaptConfig c = config;
  c.method = Method::no_adapt;
  check_contract(c);
  if (c.source_path.empty()) throw ConfigError("source training needs a labelled source dataset");
  const Split s = open_split(c.source_path, c);
  const auto train = load_slices(c.source_path, s.manifest, s.volumes.train, c.source_modality, true);
  const auto val = load_slices(c.source_path, s.manifest, s.volumes.val, c.source_modality, true);
  return finalize(train_supervised(initial_model(c, false), train, val, loop_options(c, on_epoch), Method::no_adapt), c);
}

TrainResult adapt(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  AdaptConfig c = config;
  c.method = Method::adaent;
  check_contract(c);
  SegModel init = initial_model(c, true);
  const Split s = open_split(c.target_path, c);
  const auto target = load_slices(c.target_path, s.manifest, s.volumes.train, c.target_modality, false);
  const auto val = load_slices(c.target_path, s.manifest, s.volumes.val, c.target_modality, true);
  const std::vector<ClassRatio> priors = target_priors(c, target);
  return finalize(adapt_entropy(std::move(init), target, priors, val, loop_options(c, on_epoch)), c);
}

TrainResult train_adasource(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  AdaptConfig c = config;
  c.method = Method::adasource;
  check_contract(c);
  SegModel init = initial_model(c, true);
  const Split src = open_split(c.source_path, c);
  const Split tgt = open_split(c.target_path, c);
  const auto source = load_slices(c.source_path, src.manifest, src.volumes.train, c.source_modality, true);
  const auto target = load_slices(c.target_path, tgt.manifest, tgt.volumes.train, c.target_modality, false);
  const auto val = load_slices(c.target_path, tgt.manifest, tgt.volumes.val, c.target_modality, true);
  const std::vector<ClassRatio> priors = target_priors(c, target);
  return finalize(adasource(std::move(init), source, target, priors, val, loop_options(c, on_epoch)), c);
}

TrainResult train_oracle(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  AdaptConfig c = config;
  c.method = Method::oracle;
  check_contract(c);
  const Split s = open_split(c.target_path, c);
  const auto train = load_slices(c.target_path, s.manifest, s.volumes.train, c.target_modality, true);
  const auto val = load_slices(c.target_path, s.manifest, s.volumes.val, c.target_modality, true);
  return finalize(train_supervised(initial_model(c, false), train, val, loop_options(c, on_epoch), Method::oracle), c);
}

TrainResult no_adaptation(const AdaptConfig& config) {
  AdaptConfig c = config;
  c.method = Method::no_adapt;
  c.epochs = 0;
  check_contract(c);
  if (c.target_path.empty()) throw ConfigError("no-adaptation scoring needs a target dataset");
  SegModel init = initial_model(c, true);
  const Split s = open_split(c.target_path, c);
  const auto val = load_slices(c.target_path, s.manifest, s.volumes.val, c.target_modality, true);
  LoopOptions o = loop_options(c, {});
  o.epochs = 0;
  return finalize(train_supervised(std::move(init), val, val, o, Method::no_adapt), c);
}

CheckpointMeta checkpoint_meta(const TrainResult& result, const AdaptConfig& config, int input_h, int input_w) {
  CheckpointMeta m;
  m.epoch = result.record.best_epoch;
  m.config_hash = config_hash(config);
  m.input_h = input_h;
  m.input_w = input_w;
  m.extra = {{"method", method_name(result.record.method)},
             {"run_id", result.record.run_id},
             {"best_epoch", result.record.best_epoch},
             {"last_epoch", result.record.epochs.empty() ? 0 : result.record.epochs.back().epoch},
             {"best_val_dsc", result.record.best().val.dsc.mean}};
  return m;
}

}  // namespace srda
