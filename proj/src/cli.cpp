#include "srda/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "srda/data.hpp"
#include "srda/errors.hpp"
#include "srda/io.hpp"
#include "srda/ratio_prior.hpp"
#include "srda/report.hpp"
#include "srda/trainer.hpp"

namespace fs = std::filesystem;

namespace srda::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string default_data_dir() {
  const char* env = std::getenv("SRDA_DATA_DIR");
  return env && *env ? env : "data";
}

// Flat JSON object -> "--key=value" tokens placed ahead of the command line,
// so explicit flags (parsed later, last one wins) override file values.
std::vector<std::string> config_tokens(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config file " + path + " is not valid JSON: " + e.what());
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  if (!j.is_object()) throw UsageError("config file " + path + " must hold a flat JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    for (char& c : name)
      if (c == '_') c = '-';
    if (name == "config") throw UsageError("config files cannot name another config file");
    std::string text;
    if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
    else if (value.is_string()) text = value.get<std::string>();
    else if (value.is_number()) text = value.dump();
    else throw UsageError("config key '" + key + "' must be a string, number or boolean");
    tokens.push_back("--" + name + "=" + text);
  }
  return tokens;
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app->add_option("--config", c.config, "Flat JSON file with option values; flags override it");
  app->add_flag("--quiet", c.quiet, "Suppress per-epoch progress");
}

struct TrainOpts {
  AdaptConfig cfg;
  std::string out;
  std::string runs = "runs";
  std::string source_modality = "A";
  std::string target_modality = "B";
};

void add_loop_options(CLI::App* app, TrainOpts& t) {
  app->add_option("--epochs", t.cfg.epochs, "Training epochs")->capture_default_str();
  app->add_option("--lr", t.cfg.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--batch-size", t.cfg.batch_size, "Slices per batch")->capture_default_str();
  app->add_option("--train-volumes", t.cfg.train_volumes, "Volumes used for training")->capture_default_str();
  app->add_option("--val-volumes", t.cfg.val_volumes, "Volumes used for validation")->capture_default_str();
  app->add_option("--runs", t.runs, "Directory for run records")->capture_default_str();
  app->add_option("--run-id", t.cfg.run_id, "Run record name (default <method>_seed<seed>)");
}

std::function<void(const EpochRecord&)> progress(const std::string& tag, int epochs, bool quiet) {
  if (quiet) return {};
  return [tag, epochs](const EpochRecord& e) {
    std::fprintf(stderr, "[%s] epoch %d/%d loss=%.5f ent=%.5f kl=%.5f ce=%.5f val_dsc=%.4f val_hd=%.3f (%.1fs)\n",
                 tag.c_str(), e.epoch, epochs, e.loss, e.entropy, e.kl, e.ce, e.val.dsc.mean, e.val.hd.mean,
                 e.seconds);
  };
}

void save_result(TrainResult& r, TrainOpts& t, int input_h, int input_w) {
  const CheckpointMeta meta = checkpoint_meta(r, t.cfg, input_h, input_w);
  save_checkpoint(r.model, t.out, meta);
  r.record.config["checkpoint"] = fs::absolute(t.out).string();
  if (!r.record.config.value("target", std::string()).empty())
    r.record.config["target"] = fs::absolute(r.record.config["target"].get<std::string>()).string();
  write_run_record(r.record, t.runs);
  std::printf("%s: best epoch %d, val DSC %.4f +/- %.4f, HD %.3f; checkpoint %s\n", r.record.run_id.c_str(),
              r.record.best_epoch, r.record.best().val.dsc.mean, r.record.best().val.dsc.std,
              r.record.best().val.hd.mean, t.out.c_str());
}

std::pair<int, int> dataset_shape(const std::string& root) {
  const DatasetManifest m = load_manifest(root);
  return {m.height, m.width};
}

int dispatch(const std::vector<std::string>& raw_args) {
  CLI::App app("Source-relaxed domain adaptation for segmentation", "srda");
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic two-modality phantom dataset");
  int volumes = 16;
  int depth = 12;
  int height = 64;
  int width = 64;
  std::string gen_out = default_data_dir();
  bool invert_b = false;
  add_common(gen, common);
  gen->add_option("--volumes", volumes, "Number of volumes")->capture_default_str();
  gen->add_option("--depth", depth, "Slices per volume")->capture_default_str();
  gen->add_option("--height", height, "Slice height")->capture_default_str();
  gen->add_option("--width", width, "Slice width")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (default $SRDA_DATA_DIR or ./data)");
  gen->add_flag("--invert-b", invert_b, "Also invert intensities of modality B");

  // train-ratio
  auto* ratio = app.add_subcommand("train-ratio", "Train the class-ratio regressor on labelled source slices");
  RegressorConfig rcfg;
  rcfg.lr = 1e-2;
  std::string ratio_source = default_data_dir();
  std::string ratio_modality = "A";
  std::string ratio_out = "ckpt/ratio.bin";
  int ratio_train_volumes = 13;
  int ratio_val_volumes = 3;
  bool no_augment = false;
  add_common(ratio, common);
  ratio->add_option("--source", ratio_source, "Source dataset root");
  ratio->add_option("--modality", ratio_modality, "Source modality (A or B)")->capture_default_str();
  ratio->add_option("--epochs", rcfg.epochs, "Epochs")->capture_default_str();
  ratio->add_option("--lr", rcfg.lr, "SGD learning rate")->capture_default_str();
  ratio->add_option("--momentum", rcfg.momentum, "SGD momentum")->capture_default_str();
  ratio->add_option("--batch-size", rcfg.batch_size, "Images per batch")->capture_default_str();
  ratio->add_option("--width", rcfg.width, "Base channel width")->capture_default_str();
  ratio->add_option("--train-volumes", ratio_train_volumes, "Volumes used for training")->capture_default_str();
  ratio->add_option("--val-volumes", ratio_val_volumes, "Volumes reserved for validation")->capture_default_str();
  ratio->add_flag("--no-augment", no_augment, "Disable intensity augmentation");
  ratio->add_option("--out", ratio_out, "Checkpoint path")->capture_default_str();

  // train-source
  auto* src = app.add_subcommand("train-source", "Supervised training on the source modality");
  TrainOpts src_opts;
  src_opts.out = "ckpt/source.bin";
  std::string src_root = default_data_dir();
  add_common(src, common);
  add_loop_options(src, src_opts);
  src->add_option("--source", src_root, "Source dataset root");
  src->add_option("--modality", src_opts.source_modality, "Source modality")->capture_default_str();
  src->add_option("--width", src_opts.cfg.width, "Base channel width")->capture_default_str();
  src->add_option("--init", src_opts.cfg.init_checkpoint, "Optional initial checkpoint");
  src->add_option("--out", src_opts.out, "Checkpoint path")->capture_default_str();

  // adapt
  auto* ada = app.add_subcommand("adapt", "Source-free adaptation: entropy plus class-ratio KL on target images");
  TrainOpts ada_opts;
  ada_opts.out = "ckpt/adaent.bin";
  std::string ada_target = default_data_dir();
  add_common(ada, common);
  add_loop_options(ada, ada_opts);
  ada->add_option("--init", ada_opts.cfg.init_checkpoint, "Source-trained checkpoint")->required();
  ada->add_option("--regressor", ada_opts.cfg.regressor_checkpoint, "Ratio regressor checkpoint")->required();
  ada->add_option("--target", ada_target, "Target dataset root");
  ada->add_option("--modality", ada_opts.target_modality, "Target modality")->capture_default_str();
  ada->add_option("--lambda", ada_opts.cfg.lambda, "Weight of the KL ratio term")->capture_default_str();
  ada->add_option("--out", ada_opts.out, "Checkpoint path")->capture_default_str();

  // train-adasource
  auto* as = app.add_subcommand("train-adasource", "Benchmark: source cross-entropy plus target class-ratio KL");
  TrainOpts as_opts;
  as_opts.out = "ckpt/adasource.bin";
  std::string as_source = default_data_dir();
  std::string as_target = default_data_dir();
  add_common(as, common);
  add_loop_options(as, as_opts);
  as->add_option("--init", as_opts.cfg.init_checkpoint, "Source-trained checkpoint")->required();
  as->add_option("--regressor", as_opts.cfg.regressor_checkpoint, "Ratio regressor checkpoint")->required();
  as->add_option("--source", as_source, "Source dataset root");
  as->add_option("--target", as_target, "Target dataset root");
  as->add_option("--source-modality", as_opts.source_modality, "Source modality")->capture_default_str();
  as->add_option("--target-modality", as_opts.target_modality, "Target modality")->capture_default_str();
  as->add_option("--lambda", as_opts.cfg.lambda, "Weight of the KL ratio term")->capture_default_str();
  as->add_option("--out", as_opts.out, "Checkpoint path")->capture_default_str();

  // train-oracle
  auto* orc = app.add_subcommand("train-oracle", "Supervised training on labelled target images (upper bound)");
  TrainOpts orc_opts;
  orc_opts.out = "ckpt/oracle.bin";
  std::string orc_target = default_data_dir();
  add_common(orc, common);
  add_loop_options(orc, orc_opts);
  orc->add_option("--target", orc_target, "Target dataset root");
  orc->add_option("--modality", orc_opts.target_modality, "Target modality")->capture_default_str();
  orc->add_option("--width", orc_opts.cfg.width, "Base channel width")->capture_default_str();
  orc->add_option("--init", orc_opts.cfg.init_checkpoint, "Optional initial checkpoint");
  orc->add_option("--out", orc_opts.out, "Checkpoint path")->capture_default_str();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  std::string ev_ckpt;
  std::string ev_data = default_data_dir();
  std::string ev_modality = "B";
  std::string ev_split = "val";
  std::string ev_method = "no_adapt";
  std::string ev_runs;
  std::string ev_run_id;
  int ev_train_volumes = 13;
  int ev_val_volumes = 3;
  add_common(ev, common);
  ev->add_option("--checkpoint", ev_ckpt, "Segmentation checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset root");
  ev->add_option("--modality", ev_modality, "Modality to score")->capture_default_str();
  ev->add_option("--split", ev_split, "val, train or all")->capture_default_str()->check(CLI::IsMember({"val", "train", "all"}));
  ev->add_option("--train-volumes", ev_train_volumes, "Training volumes in the split")->capture_default_str();
  ev->add_option("--val-volumes", ev_val_volumes, "Validation volumes in the split")->capture_default_str();
  ev->add_option("--runs", ev_runs, "Also write a run record (one epoch-0 entry) into this directory");
  ev->add_option("--run-id", ev_run_id, "Run record name");
  ev->add_option("--method", ev_method, "Method label for the run record")
      ->capture_default_str()
      ->check(CLI::IsMember({"no_adapt", "adaent", "adasource", "oracle"}));

  // report
  auto* rep = app.add_subcommand("report", "DSC curves, entropy panels and the results table");
  std::string rep_runs = "runs";
  std::string rep_out = "figs";
  add_common(rep, common);
  rep->add_option("--runs", rep_runs, "Directory of run records")->capture_default_str();
  rep->add_option("--out", rep_out, "Output directory")->capture_default_str();

  for (CLI::App* sub : app.get_subcommands({})) {
    for (CLI::Option* opt : sub->get_options()) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  // Splice config-file tokens in right after the subcommand name.
  std::vector<std::string> args = raw_args;
  if (!args.empty()) {
    std::optional<std::string> config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path) {
      const auto tokens = config_tokens(*config_path);
      args.insert(args.begin() + 1, tokens.begin(), tokens.end());
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto finish_cfg = [&](TrainOpts& t, Method m) {
    t.cfg.method = m;
    t.cfg.seed = common.seed;
    t.cfg.source_modality = parse_modality(t.source_modality);
    t.cfg.target_modality = parse_modality(t.target_modality);
  };

  if (gen->parsed()) {
    PhantomConfig pc;
    pc.invert_b = invert_b;
    const auto vols = generate_phantoms(common.seed, volumes, depth, height, width, pc);
    save_dataset(gen_out, vols, common.seed, pc);
    int empty = 0;
    for (const auto& v : vols)
      for (int d = 0; d < v.depth; ++d) empty += !v.slice_has_foreground(d);
    std::printf("wrote %d volumes (%dx%dx%d) to %s; %d of %d slices have no foreground\n", volumes, depth, height,
                width, gen_out.c_str(), empty, volumes * depth);
  } else if (ratio->parsed()) {
    rcfg.seed = common.seed;
    rcfg.augment = !no_augment;
    const DatasetManifest m = load_manifest(ratio_source);
    const VolumeSplit s = split(m.volumes, ratio_train_volumes, ratio_val_volumes);
    const auto slices = load_slices(ratio_source, m, s.train, parse_modality(ratio_modality), true);
    RegressorReport rr;
    RatioRegressor reg = train_regressor(slices, rcfg, &rr);
    CheckpointMeta meta;
    meta.epoch = rcfg.epochs;
    meta.input_h = m.height;
    meta.input_w = m.width;
    meta.config_hash = config_hash(std::to_string(rcfg.epochs) + "/" + std::to_string(rcfg.lr) + "/" +
                                   std::to_string(rcfg.momentum) + "/" + std::to_string(rcfg.seed));
    meta.extra = {{"lr", rcfg.lr},
                  {"momentum", rcfg.momentum},
                  {"batch_size", rcfg.batch_size},
                  {"augment", rcfg.augment},
                  {"initial_heldout_mse", rr.initial_heldout_mse},
                  {"final_heldout_mse", rr.final_heldout_mse},
                  {"train_images", rr.train_images},
                  {"heldout_images", rr.heldout_images}};
    save_checkpoint(reg.net(), ratio_out, meta);
    std::printf("regressor: held-out MSE %.5f -> %.5f on %d images; checkpoint %s\n", rr.initial_heldout_mse,
                rr.final_heldout_mse, rr.heldout_images, ratio_out.c_str());
  } else if (src->parsed()) {
    finish_cfg(src_opts, Method::no_adapt);
    src_opts.cfg.source_path = src_root;
    if (src_opts.cfg.run_id.empty()) src_opts.cfg.run_id = "source_seed" + std::to_string(common.seed);
    TrainResult r = train_source(src_opts.cfg, progress("source", src_opts.cfg.epochs, common.quiet));
    const auto [h, w] = dataset_shape(src_root);
    save_result(r, src_opts, h, w);
  } else if (ada->parsed()) {
    finish_cfg(ada_opts, Method::adaent);
    ada_opts.cfg.target_path = ada_target;
    TrainResult r = adapt(ada_opts.cfg, progress("adaent", ada_opts.cfg.epochs, common.quiet));
    const auto [h, w] = dataset_shape(ada_target);
    save_result(r, ada_opts, h, w);
  } else if (as->parsed()) {
    finish_cfg(as_opts, Method::adasource);
    as_opts.cfg.source_path = as_source;
    as_opts.cfg.target_path = as_target;
    TrainResult r = train_adasource(as_opts.cfg, progress("adasource", as_opts.cfg.epochs, common.quiet));
    const auto [h, w] = dataset_shape(as_target);
    save_result(r, as_opts, h, w);
  } else if (orc->parsed()) {
    finish_cfg(orc_opts, Method::oracle);
    orc_opts.cfg.target_path = orc_target;
    TrainResult r = train_oracle(orc_opts.cfg, progress("oracle", orc_opts.cfg.epochs, common.quiet));
    const auto [h, w] = dataset_shape(orc_target);
    save_result(r, orc_opts, h, w);
  } else if (ev->parsed()) {
    SegCheckpoint ck = load_seg_checkpoint(ev_ckpt);
    const DatasetManifest m = load_manifest(ev_data);
    const VolumeSplit s = split(m.volumes, ev_train_volumes, ev_val_volumes);
    std::vector<int> ids = ev_split == "val" ? s.val : ev_split == "train" ? s.train : m.volumes;
    const Modality mod = parse_modality(ev_modality);
    const auto slices = load_slices(ev_data, m, ids, mod, true);
    const EvalSummary e = evaluate(ck.model, slices);
    const std::string run_id = ev_run_id.empty() ? ev_method + "_seed" + std::to_string(common.seed) : ev_run_id;
    std::printf("run_id,method,epoch,volume,dsc,hd,entropy\n");
    for (const VolumeScore& v : e.volumes)
      std::printf("%s,%s,%d,%d,%.6f,%.6f,%.6f\n", run_id.c_str(), ev_method.c_str(), ck.meta.epoch, v.volume, v.dsc,
                  v.hd, v.entropy);
    std::printf("# mean DSC %.4f +/- %.4f, HD %.3f +/- %.3f, entropy %.5f\n", e.dsc.mean, e.dsc.std, e.hd.mean,
                e.hd.std, e.entropy);
    if (!ev_runs.empty()) {
      RunRecord r;
      r.run_id = run_id;
      r.method = parse_method(ev_method);
      r.seed = common.seed;
      EpochRecord er;
      er.val = e;
      r.epochs.push_back(er);
      r.config = {{"checkpoint", fs::absolute(ev_ckpt).string()},
                  {"target", fs::absolute(ev_data).string()},
                  {"target_modality", modality_name(mod)},
                  {"train_volumes", ev_train_volumes},
                  {"val_volumes", ev_val_volumes}};
      write_run_record(r, ev_runs);
    }
  } else if (rep->parsed()) {
    const ReportOutputs out = write_report(rep_runs, rep_out);
    std::printf("report from %d runs:\n", out.runs);
    for (const auto& f : out.files) std::printf("  %s\n", f.string().c_str());
    std::fputs(io::read_text(fs::path(rep_out) / "results_table.txt").c_str(), stdout);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return dispatch(args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace srda::cli
