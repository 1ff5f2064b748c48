#pragma once

// The four training regimes on top of the library: supervised source
// training (the no-adaptation baseline), entropy-plus-ratio adaptation on
// unlabeled target images, the source-plus-ratio benchmark, and supervised
// target training (oracle). Every regime evaluates on the validation volumes
// after each epoch and keeps the best-scoring weights; the last epoch is
// recorded too.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srda/data.hpp"
#include "srda/metrics.hpp"
#include "srda/models.hpp"
#include "srda/ratio_prior.hpp"

namespace srda {

enum class Method { no_adapt, adaent, adasource, oracle };

std::string method_name(Method m);
Method parse_method(const std::string& s);

struct AdaptConfig {
  Method method = Method::adaent;
  double lambda = 1e-2;
  double lr = 1e-3;
  int epochs = 40;
  int batch_size = 12;
  std::uint64_t seed = 0;
  int classes = 2;
  int width = 16;
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::filesystem::path init_checkpoint;
  std::filesystem::path regressor_checkpoint;
  Modality source_modality = Modality::a;
  Modality target_modality = Modality::b;
  int train_volumes = 13;
  int val_volumes = 3;
  std::string run_id;
};

nlohmann::json to_json(const AdaptConfig& c);
/// Hash of the settings that change the result (paths excluded).
std::string config_hash(const AdaptConfig& c);

/// Rejects configurations that break a method's data contract, e.g. an
/// adaptation run that names a source dataset.
void check_contract(const AdaptConfig& c);

struct EvalSummary {
  std::vector<VolumeScore> volumes;
  MeanStd dsc;
  MeanStd hd;
  double entropy = 0.0;           // mean per-pixel prediction entropy
  double foreground_ratio = 0.0;  // mean soft foreground proportion
};

/// Evaluation-mode scores on labelled slices, aggregated per volume.
EvalSummary evaluate(SegModel& model, std::span<const SliceSample> slices, int cls = 1);
/// Scores precomputed predictions, one per slice.
EvalSummary evaluate_predictions(std::span<const ProbMap> probs, std::span<const SliceSample> slices, int cls = 1);

struct EpochRecord {
  int epoch = 0;  // 0 is the initial model
  double loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double ce = 0.0;
  EvalSummary val;
  double seconds = 0.0;
};

struct RunRecord {
  std::string run_id;
  Method method = Method::no_adapt;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double wall_seconds = 0.0;
  nlohmann::json config = nlohmann::json::object();

  const EpochRecord& best() const;
  const EpochRecord& last() const { return epochs.back(); }
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);
/// Writes <dir>/<run_id>.json, <run_id>.csv (per epoch) and
/// <run_id>_volumes.csv (per epoch and volume).
void write_run_record(const RunRecord& r, const std::filesystem::path& dir);
RunRecord read_run_record(const std::filesystem::path& json_path);

struct LoopOptions {
  double lr = 1e-3;
  int epochs = 40;
  int batch_size = 12;
  double lambda = 1e-2;
  std::uint64_t seed = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  SegModel model;
  RunRecord record;
};

/// Cross-entropy training from the given initial model.
TrainResult train_supervised(SegModel model, std::span<const SliceSample> train, std::span<const SliceSample> val,
                             const LoopOptions& options, Method method = Method::no_adapt);

/// Entropy plus lambda * KL(prior || predicted ratio) on unlabeled target
/// slices. priors[i] belongs to target[i] and stays fixed.
TrainResult adapt_entropy(SegModel model, std::span<const SliceSample> target, std::span<const ClassRatio> priors,
                          std::span<const SliceSample> val, const LoopOptions& options);

/// Source cross-entropy plus lambda * KL on target slices. Source and target
/// batches are drawn from independent permutations.
TrainResult adasource(SegModel model, std::span<const SliceSample> source, std::span<const SliceSample> target,
                      std::span<const ClassRatio> priors, std::span<const SliceSample> val,
                      const LoopOptions& options);

/// Dataset-level entry points. They read only what the method is entitled
/// to: adapt opens target images, target validation masks, the
/// initial checkpoint and the regressor, and nothing from the source side.
TrainResult train_source(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainResult adapt(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainResult train_adasource(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});
TrainResult train_oracle(const AdaptConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {});
/// The initial checkpoint scored on the target validation volumes.
TrainResult no_adaptation(const AdaptConfig& config);

/// Checkpoint metadata for a finished run.
CheckpointMeta checkpoint_meta(const TrainResult& result, const AdaptConfig& config, int input_h, int input_w);

}  // namespace srda
