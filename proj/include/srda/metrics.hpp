#pragma once

#include <span>
#include <vector>

#include "srda/losses.hpp"

namespace srda {

/// Per-pixel argmax; ties go to the lowest class index.
LabelMask argmax_mask(const ProbMap& pred);

/// Dice overlap of class cls. Two empty masks score 1.
double dice(const LabelMask& pred, const LabelMask& gt, int cls);

/// Symmetric Hausdorff distance in pixels between the cls pixel sets. Two
/// empty sets give 0; exactly one empty set gives the image diagonal.
double hausdorff(const LabelMask& pred, const LabelMask& gt, int cls);

/// All-pairs max-min Hausdorff, quadratic in the set sizes. Kept as the
/// reference for hausdorff().
double hausdorff_brute_force(const LabelMask& pred, const LabelMask& gt, int cls);

/// Per-pixel entropy, (H, W).
std::vector<double> entropy_map(const ProbMap& pred);

/// Squared Euclidean distance from every pixel to the nearest pixel with
/// feature[i] != 0. Pixels are unreachable (-1) when no feature pixel exists.
std::vector<long long> squared_distance_transform(std::span<const std::uint8_t> feature, int h, int w);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population standard deviation.
MeanStd mean_std(std::span<const double> values);

/// One slice's score, tagged with its volume so results can be grouped.
struct SliceScore {
  int volume = 0;
  bool has_foreground = false;
  double dsc = 0.0;
  double hd = 0.0;
  double entropy = 0.0;
  double foreground_ratio = 0.0;
};

struct VolumeScore {
  int volume = 0;
  double dsc = 0.0;  // mean over slices with ground-truth foreground
  double hd = 0.0;
  double entropy = 0.0;  // mean over all slices
  double foreground_ratio = 0.0;
  int scored_slices = 0;
};

/// Groups slice scores by volume in order of first appearance.
std::vector<VolumeScore> aggregate_volumes(std::span<const SliceScore> slices);

}  // namespace srda
