#pragma once

// Figures and tables from finished runs: validation DSC per epoch, per-subject
// prediction-entropy panels, and a method x (DSC, HD) table as CSV and text.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srda/data.hpp"
#include "srda/models.hpp"
#include "srda/trainer.hpp"

namespace srda {

void write_dsc_curves(std::span<const RunRecord> runs, const std::filesystem::path& png);

struct PanelModel {
  std::string label;
  SegModel* model;
};

/// One PNG per validation volume at its slice with the most foreground:
/// image, ground truth, then each model's entropy map with its predicted
/// outline. Returns the written paths.
std::vector<std::filesystem::path> write_entropy_panels(std::span<const PanelModel> models,
                                                        std::span<const SliceSample> val,
                                                        const std::filesystem::path& out_dir);

/// Method, run id, best epoch, DSC mean/std (percent), HD mean/std (pixels),
/// entropy; best-validation epoch of each run.
std::string results_csv(std::span<const RunRecord> runs);
std::string results_table(std::span<const RunRecord> runs);

struct ReportOutputs {
  std::vector<std::filesystem::path> files;
  int runs = 0;
};

/// Reads every run record (*.json with an "epochs" array) in runs_dir and
/// writes curves, tables and, where the run's checkpoint and dataset are
/// reachable, entropy panels into out_dir.
ReportOutputs write_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir);

}  // namespace srda
