#pragma once

// Synthetic cross-modality phantoms, the on-disk dataset layout, and a loader
// for real volumes stored as .npy files.
//
// Dataset layout written by save_dataset:
//   root/manifest.json
//   root/vol_000/image_modA.npy   float32 (D, H, W)
//   root/vol_000/image_modB.npy   float32 (D, H, W)
//   root/vol_000/mask.npy         uint8   (D, H, W)
// The manifest carries shapes, the generator settings and per-slice
// foreground tags, so image-level tags are available without opening masks.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "srda/losses.hpp"
#include "srda/rng.hpp"
#include "srda/tensor.hpp"

namespace srda {

/// Intensities of background, body, vertebra and disc tissue.
struct TissueTable {
  std::array<double, 4> values{};
};

struct PhantomConfig {
  TissueTable table_a{{0.10, 0.30, 0.45, 0.85}};
  TissueTable table_b{{0.12, 0.30, 0.42, 0.66}};
  double texture_amplitude = 0.04;
  double noise_a = 0.02;
  double noise_b_min = 0.02;
  double noise_b_max = 0.05;
  double gamma_b_min = 1.1;
  double gamma_b_max = 1.5;
  double bias_b = 0.3;
  bool invert_b = false;
  int min_discs = 3;
  int max_discs = 7;
  double min_ratio = 0.02;
  double max_ratio = 0.25;
};

nlohmann::json to_json(const PhantomConfig& c);
PhantomConfig phantom_config_from_json(const nlohmann::json& j);

struct ModalityParams {
  bool invert = false;
  double gamma = 1.0;
  double bias_amplitude = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t field_seed = 0;
  std::uint64_t noise_seed = 0;
};

nlohmann::json to_json(const ModalityParams& p);
ModalityParams modality_params_from_json(const nlohmann::json& j);

struct PhantomVolume {
  int id = 0;
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> mask;  // (D, H, W), 1 = disc
  std::vector<float> image_a;
  std::vector<float> image_b;
  ModalityParams params_a;
  ModalityParams params_b;

  std::size_t slice_size() const { return static_cast<std::size_t>(height) * width; }
  bool slice_has_foreground(int d) const;
};

/// Sum of three random sinusoid products scaled to the given amplitude, (H, W).
std::vector<double> smooth_field(Rng& rng, int h, int w, double amplitude);

/// Inversion, gamma, multiplicative bias field and additive noise, then a clip
/// to [0,1]. image holds one or more (H, W) slices; all share the bias field.
std::vector<float> modality_transform(std::span<const float> image, int h, int w, const ModalityParams& params);

std::vector<PhantomVolume> generate_phantoms(std::uint64_t seed, int n_volumes, int depth, int height,
                                             int width, const PhantomConfig& config = {});

struct VolumeSplit {
  std::vector<int> train;
  std::vector<int> val;
};

/// First train_count volumes train, the next val_count validate.
VolumeSplit split(std::span<const int> volume_ids, int train_count, int val_count);

struct SliceSample {
  Tensor image;  // (1, 1, H, W)
  LabelMask mask;  // empty when labels were not loaded
  bool has_foreground = false;
  int volume = 0;
  int slice = 0;
};

enum class Modality { a, b };
Modality parse_modality(const std::string& s);
std::string modality_name(Modality m);
std::string image_file_name(Modality m);

struct DatasetManifest {
  std::uint64_t seed = 0;
  int depth = 0;
  int height = 0;
  int width = 0;
  std::vector<int> volumes;
  std::vector<std::vector<bool>> tags;  // per volume, per slice
  nlohmann::json generator;
};

void save_dataset(const std::filesystem::path& root, const std::vector<PhantomVolume>& volumes,
                  std::uint64_t seed, const PhantomConfig& config);
DatasetManifest load_manifest(const std::filesystem::path& root);
std::filesystem::path volume_dir(const std::filesystem::path& root, int volume);

/// Slices of the given volumes in one modality. With with_masks false no mask
/// file is opened and tags come from the manifest.
std::vector<SliceSample> load_slices(const std::filesystem::path& root, const DatasetManifest& manifest,
                                     std::span<const int> volumes, Modality modality, bool with_masks);

/// In-memory equivalent of load_slices for generated volumes.
std::vector<SliceSample> to_slices(const std::vector<PhantomVolume>& volumes, std::span<const int> ids,
                                   Modality modality);

struct SliceLayout {
  std::string image_name = "image.npy";
  std::string mask_name = "mask.npy";
  int axis = 0;           // slicing axis of the (D, H, W) arrays
  int rotate_quarters = 0;  // counter-clockwise quarter turns applied to each slice
};

/// Reads every sub-directory of directory holding layout.image_name and
/// layout.mask_name. Intensities are min-max normalised per volume.
std::vector<SliceSample> load_real_slices(const std::filesystem::path& directory, const SliceLayout& layout);

Tensor stack_images(std::span<const SliceSample> samples, std::span<const int> indices);

}  // namespace srda
