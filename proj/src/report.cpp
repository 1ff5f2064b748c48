#include "srda/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

#include "srda/errors.hpp"
#include "srda/io.hpp"
#include "srda/raster.hpp"

namespace srda {
namespace {

const Rgb kBlack{0, 0, 0};
const Rgb kGrid{225, 225, 225};
const Rgb kAxis{90, 90, 90};

Rgb method_color(Method m, int variant) {
  static const Rgb base[4] = {{200, 60, 50}, {40, 110, 200}, {40, 160, 90}, {130, 80, 170}};
  Rgb c = base[static_cast<int>(m)];
  for (auto& ch : c) ch = static_cast<std::uint8_t>(std::min(255, ch + 35 * variant));
  return c;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int method_rank(Method m) {
  switch (m) {
    case Method::no_adapt: return 0;
    case Method::adasource: return 1;
    case Method::adaent: return 2;
    case Method::oracle: return 3;
  }
  return 4;
}

std::string display_name(Method m) {
  switch (m) {
    case Method::no_adapt: return "NoAdaptation";
    case Method::adaent: return "AdaEnt";
    case Method::adasource: return "AdaSource";
    case Method::oracle: return "Oracle";
  }
  return "?";
}

std::vector<const RunRecord*> ordered(std::span<const RunRecord> runs) {
  std::vector<const RunRecord*> v;
  for (const RunRecord& r : runs) v.push_back(&r);
  std::stable_sort(v.begin(), v.end(), [](const RunRecord* a, const RunRecord* b) {
    return method_rank(a->method) < method_rank(b->method);
  });
  return v;
}

}  // namespace

void write_dsc_curves(std::span<const RunRecord> runs, const std::filesystem::path& png) {
  const int W = 760;
  const int H = 460;
  const int left = 70;
  const int right = 200;
  const int top = 40;
  const int bottom = 60;
  Canvas cv(W, H);
  const int pw = W - left - right;
  const int ph = H - top - bottom;
  int max_epoch = 1;
  for (const RunRecord& r : runs)
    for (const EpochRecord& e : r.epochs) max_epoch = std::max(max_epoch, e.epoch);
  auto px = [&](double epoch) { return left + epoch / max_epoch * pw; };
  auto py = [&](double dsc) { return top + (1.0 - dsc) * ph; };
  for (int k = 0; k <= 10; ++k) {
    const double v = k / 10.0;
    cv.line(left, py(v), left + pw, py(v), kGrid);
    if (k % 2 == 0) cv.text(left - 36, static_cast<int>(py(v)) - 5, fmt("%.1f", v), kAxis);
  }
  const int step = std::max(1, max_epoch / 8);
  for (int e = 0; e <= max_epoch; e += step) {
    cv.line(px(e), top, px(e), top + ph, kGrid);
    cv.text(static_cast<int>(px(e)) - 6, top + ph + 8, std::to_string(e), kAxis);
  }
  cv.stroke_rect(left, top, pw + 1, ph + 1, kAxis);
  cv.text(left, 12, "Validation DSC over training", kBlack, 2);
  cv.text(left + pw / 2 - 15, H - 26, "epoch", kBlack);
  cv.text(8, top + ph / 2, "DSC", kBlack);

  std::map<Method, int> seen;
  int legend_y = top;
  for (const RunRecord* r : ordered(runs)) {
    const Rgb c = method_color(r->method, seen[r->method]++);
    for (std::size_t i = 1; i < r->epochs.size(); ++i)
      cv.line(px(r->epochs[i - 1].epoch), py(r->epochs[i - 1].val.dsc.mean), px(r->epochs[i].epoch),
              py(r->epochs[i].val.dsc.mean), c, 2);
    const EpochRecord& b = r->best();
    cv.fill_rect(static_cast<int>(px(b.epoch)) - 3, static_cast<int>(py(b.val.dsc.mean)) - 3, 7, 7, c);
    cv.fill_rect(left + pw + 14, legend_y + 3, 16, 4, c);
    cv.text(left + pw + 36, legend_y, r->run_id.substr(0, 26), kBlack);
    legend_y += 16;
  }
  cv.write_png(png);
}

std::vector<std::filesystem::path> write_entropy_panels(std::span<const PanelModel> models,
                                                        std::span<const SliceSample> val,
                                                        const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  std::map<int, int> best_slice;
  std::map<int, std::size_t> best_count;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto fg = static_cast<std::size_t>(std::count_if(val[i].mask.values.begin(), val[i].mask.values.end(),
                                                           [](std::uint8_t v) { return v != 0; }));
    auto it = best_count.find(val[i].volume);
    if (it == best_count.end() || fg > it->second) {
      best_count[val[i].volume] = fg;
      best_slice[val[i].volume] = static_cast<int>(i);
    }
  }
  const int zoom = std::max(1, 192 / std::max(1, val.empty() ? 1 : val.front().image.w));
  for (const auto& [volume, index] : best_slice) {
    const SliceSample& s = val[static_cast<std::size_t>(index)];
    const int h = s.image.h;
    const int w = s.image.w;
    const int tile = w * zoom;
    const int gap = 12;
    const int cols = 2 + static_cast<int>(models.size());
    Canvas cv(gap + cols * (tile + gap), h * zoom + 70);
    const int y0 = 36;
    std::vector<double> img(s.image.data.begin(), s.image.data.end());
    cv.blit(gap, y0, img, h, w, 0.0, 1.0, Colormap::gray, zoom);
    cv.text(gap, y0 - 16, "image", kBlack);
    cv.blit(gap + (tile + gap), y0, img, h, w, 0.0, 1.0, Colormap::gray, zoom);
    cv.overlay(gap + (tile + gap), y0, s.mask.values, h, w, {40, 200, 80}, 0.55, zoom);
    cv.text(gap + (tile + gap), y0 - 16, "ground truth", kBlack);
    for (std::size_t m = 0; m < models.size(); ++m) {
      const ProbMap p = segment(*models[m].model, s.image);
      const std::vector<double> e = entropy_map(p);
      const int x = gap + static_cast<int>(m + 2) * (tile + gap);
      cv.blit(x, y0, e, h, w, 0.0, std::log(static_cast<double>(p.k)), Colormap::heat, zoom);
      const LabelMask pred = argmax_mask(p);
      std::vector<std::uint8_t> edge(pred.values.size(), 0);
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) {
          if (!pred.at(yy, xx)) continue;
          const bool border = yy == 0 || xx == 0 || yy == h - 1 || xx == w - 1 || !pred.at(yy - 1, xx) ||
                              !pred.at(yy + 1, xx) || !pred.at(yy, xx - 1) || !pred.at(yy, xx + 1);
          edge[static_cast<std::size_t>(yy) * w + xx] = border;
        }
      cv.overlay(x, y0, edge, h, w, {80, 220, 255}, 0.8, zoom);
      double mean = 0.0;
      for (double v : e) mean += v;
      mean /= static_cast<double>(e.size());
      cv.text(x, y0 - 16, models[m].label.substr(0, static_cast<std::size_t>(tile / 6)), kBlack);
      cv.text(x, y0 + h * zoom + 6, "mean H " + fmt("%.4f", mean), kBlack);
      cv.text(x, y0 + h * zoom + 20, "DSC " + fmt("%.3f", dice(pred, s.mask, 1)), kBlack);
    }
    cv.text(gap, 6, "volume " + std::to_string(volume) + ", slice " + std::to_string(s.slice), kBlack);
    char name[64];
    std::snprintf(name, sizeof name, "entropy_vol_%03d.png", volume);
    cv.write_png(out_dir / name);
    written.push_back(out_dir / name);
  }
  return written;
}

std::string results_csv(std::span<const RunRecord> runs) {
  std::ostringstream os;
  os << "method,run_id,seed,lambda,best_epoch,last_epoch,dsc_mean,dsc_std,hd_mean,hd_std,entropy,"
        "last_dsc_mean,last_hd_mean\n";
  for (const RunRecord* r : ordered(runs)) {
    const EpochRecord& b = r->best();
    const EpochRecord& l = r->last();
    os << method_name(r->method) << ',' << r->run_id << ',' << r->seed << ',' << r->lambda << ',' << r->best_epoch
       << ',' << l.epoch << ',' << fmt("%.2f", 100 * b.val.dsc.mean) << ',' << fmt("%.2f", 100 * b.val.dsc.std) << ','
       << fmt("%.3f", b.val.hd.mean) << ',' << fmt("%.3f", b.val.hd.std) << ',' << fmt("%.5f", b.val.entropy) << ','
       << fmt("%.2f", 100 * l.val.dsc.mean) << ',' << fmt("%.3f", l.val.hd.mean) << '\n';
  }
  return os.str();
}

std::string results_table(std::span<const RunRecord> runs) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-28s %-18s %-16s %s\n", "Method", "Run", "DSC (%)", "HD (pix)", "epoch");
  os << line;
  os << std::string(84, '-') << '\n';
  for (const RunRecord* r : ordered(runs)) {
    const EpochRecord& b = r->best();
    const std::string dsc = fmt("%.1f", 100 * b.val.dsc.mean) + " +/- " + fmt("%.1f", 100 * b.val.dsc.std);
    const std::string hd = fmt("%.2f", b.val.hd.mean) + " +/- " + fmt("%.2f", b.val.hd.std);
    std::snprintf(line, sizeof line, "%-14s %-28s %-18s %-16s %d\n", display_name(r->method).c_str(),
                  r->run_id.substr(0, 28).c_str(), dsc.c_str(), hd.c_str(), r->best_epoch);
    os << line;
  }
  os << "\nScores use the best-validation epoch of each run. DSC and HD are computed per 2D slice over\n"
        "slices whose ground truth contains foreground, averaged within each validation volume, and\n"
        "reported as mean +/- std over volumes. HD is the plain Hausdorff distance between foreground\n"
        "pixel sets.\n";
  return os.str();
}

ReportOutputs write_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir) {
  if (!std::filesystem::is_directory(runs_dir)) throw IoError(runs_dir.string() + " is not a directory");
  std::vector<std::filesystem::path> paths;
  for (const auto& e : std::filesystem::directory_iterator(runs_dir))
    if (e.is_regular_file() && e.path().extension() == ".json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  std::vector<RunRecord> runs;
  for (const auto& p : paths) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(io::read_text(p));
    } catch (const nlohmann::json::parse_error&) {
      continue;
    }
    if (!j.is_object() || !j.contains("epochs")) continue;
    runs.push_back(run_record_from_json(j));
  }
  if (runs.empty()) throw IoError("no run records found in " + runs_dir.string());

  ReportOutputs out;
  out.runs = static_cast<int>(runs.size());
  std::filesystem::create_directories(out_dir);
  write_dsc_curves(runs, out_dir / "dsc_curves.png");
  out.files.push_back(out_dir / "dsc_curves.png");
  io::write_text(out_dir / "results.csv", results_csv(runs));
  out.files.push_back(out_dir / "results.csv");
  io::write_text(out_dir / "results_table.txt", results_table(runs));
  out.files.push_back(out_dir / "results_table.txt");

  // Entropy panels need each run's checkpoint and the target dataset.
  std::vector<SegModel> models;
  std::vector<std::string> labels;
  std::filesystem::path target;
  AdaptConfig split_config;
  Modality modality = Modality::b;
  for (const RunRecord* r : ordered(runs)) {
    const auto& c = r->config;
    const std::string ckpt = c.value("checkpoint", "");
    const std::string tgt = c.value("target", "");
    if (ckpt.empty() || tgt.empty() || !std::filesystem::exists(ckpt) || !std::filesystem::exists(tgt)) continue;
    if (target.empty()) {
      target = tgt;
      modality = parse_modality(c.value("target_modality", "B"));
      split_config.train_volumes = c.value("train_volumes", 13);
      split_config.val_volumes = c.value("val_volumes", 3);
    } else if (tgt != target.string()) {
      continue;
    }
    models.push_back(load_seg_checkpoint(ckpt).model);
    labels.push_back(display_name(r->method) + " s" + std::to_string(r->seed));
  }
  if (!models.empty()) {
    const DatasetManifest m = load_manifest(target);
    const VolumeSplit s = split(m.volumes, split_config.train_volumes, split_config.val_volumes);
    const auto val = load_slices(target, m, s.val, modality, true);
    std::vector<PanelModel> panel;
    for (std::size_t i = 0; i < models.size(); ++i) panel.push_back({labels[i], &models[i]});
    for (const auto& p : write_entropy_panels(panel, val, out_dir)) out.files.push_back(p);
  } else {
    std::cerr << "warning: no run has a reachable checkpoint and dataset; skipping entropy panels\n";
  }
  return out;
}

}  // namespace srda
