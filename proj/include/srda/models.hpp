#pragma once

// Segmentation network (a 4-level U-shaped encoder-decoder with batch norm),
// the small convolutional ratio regressor, and their checkpoint format.
//
// Layers cache activations for the backward pass, so a model instance must
// not be shared between threads, even for inference. Copy the model instead.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "srda/losses.hpp"
#include "srda/nn.hpp"
#include "srda/tensor.hpp"

namespace srda {

struct SegModelConfig {
  int classes = 2;
  int width = 16;
  int levels = 4;
  std::uint64_t seed = 0;
};

class SegModel {
 public:
  explicit SegModel(const SegModelConfig& config);

  const SegModelConfig& config() const { return config_; }

  /// (n, 1, H, W) images to (n, K, H, W) logits. H and W must be divisible
  /// by 2^(levels-1).
  Tensor forward(const Tensor& images, Mode mode);
  /// Accumulates parameter gradients for the last forward pass.
  void backward(const Tensor& dlogits);

  std::vector<Param*> parameters();
  std::vector<Buffer> buffers();
  std::size_t parameter_count();

 private:
  struct Level {
    ConvBlock a;
    ConvBlock b;
    MaxPool2 pool;
  };
  struct Up {
    ConvBlock a;
    ConvBlock b;
    int skip_channels = 0;
  };

  SegModelConfig config_;
  std::vector<Level> encoder_;
  std::vector<Up> decoder_;
  Conv2d head_;
};

SegModel build_seg_model(int classes, int width, std::uint64_t seed, int levels = 4);

std::vector<ProbMap> to_probmaps(const Tensor& logits);
/// Packs per-image gradients with respect to the softmax output into a
/// gradient with respect to the logits.
Tensor logits_gradient(const std::vector<ProbMap>& probs, const std::vector<std::vector<double>>& grads);

/// Evaluation-mode softmax prediction for a single (1, 1, H, W) image.
ProbMap segment(SegModel& model, const Tensor& image);
std::vector<ProbMap> segment_batch(SegModel& model, const Tensor& images, Mode mode);

struct RatioNetConfig {
  int classes = 2;
  int width = 16;
  std::uint64_t seed = 0;
};

/// conv-relu x4 (width, 2w, 4w, 4w) with 2x2 pooling after the first three,
/// global average pooling and a K-way linear head. Outputs raw values.
class RatioNet {
 public:
  explicit RatioNet(const RatioNetConfig& config);

  const RatioNetConfig& config() const { return config_; }
  /// (n, 1, H, W) to (n, K, 1, 1).
  Tensor forward(const Tensor& images);
  void backward(const Tensor& dout);
  std::vector<Param*> parameters();
  std::size_t parameter_count();

 private:
  RatioNetConfig config_;
  std::vector<Conv2d> convs_;
  std::vector<MaxPool2> pools_;
  std::vector<Tensor> outputs_;
  Conv2d head_;
  int last_h_ = 0;
  int last_w_ = 0;
};

std::string config_hash(std::string_view text);

struct CheckpointMeta {
  std::string kind;  // "seg" or "ratio"
  int classes = 2;
  int width = 16;
  int levels = 4;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::string config_hash;
  int input_h = 0;
  int input_w = 0;
  nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json to_json(const CheckpointMeta& meta);
CheckpointMeta meta_from_json(const nlohmann::json& j);

struct NamedTensor {
  std::string name;
  std::vector<float> values;
};

struct CheckpointData {
  CheckpointMeta meta;
  std::vector<NamedTensor> tensors;
  std::vector<std::vector<float>> optimizer_state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary blob plus a JSON sidecar at path + ".json".
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
/// Throws IoError on truncated, corrupt or version-mismatched files.
CheckpointData read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(SegModel& model, const std::filesystem::path& path, const CheckpointMeta& meta,
                     const Adam* optimizer = nullptr);
struct SegCheckpoint {
  SegModel model;
  CheckpointMeta meta;
  std::vector<std::vector<float>> optimizer_state;
};
/// Rejects a checkpoint whose class count differs from expected_classes.
SegCheckpoint load_seg_checkpoint(const std::filesystem::path& path,
                                  std::optional<int> expected_classes = std::nullopt);

void save_checkpoint(RatioNet& model, const std::filesystem::path& path, const CheckpointMeta& meta);
struct RatioCheckpoint {
  RatioNet model;
  CheckpointMeta meta;
};
RatioCheckpoint load_ratio_checkpoint(const std::filesystem::path& path);

/// Copies parameter and buffer values between models of equal architecture.
std::vector<NamedTensor> snapshot(SegModel& model);
void restore(SegModel& model, const std::vector<NamedTensor>& tensors);

}  // namespace srda
