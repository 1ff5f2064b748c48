#include "srda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "srda/errors.hpp"

namespace srda {
namespace {

void check_pair(const LabelMask& a, const LabelMask& b) {
  if (a.h != b.h || a.w != b.w) throw ShapeError("masks differ in shape");
}

// One-dimensional lower envelope of parabolas (Felzenszwalb and Huttenlocher).
// Works on integers; kInf marks missing samples.
constexpr long long kInf = std::numeric_limits<long long>::max() / 4;

void edt_1d(const long long* f, long long* d, int n, std::vector<int>& v, std::vector<double>& z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] >= kInf) continue;
    while (k >= 0) {
      const int p = v[static_cast<std::size_t>(k)];
      const double s = (static_cast<double>(f[q] + static_cast<long long>(q) * q) -
                        static_cast<double>(f[p] + static_cast<long long>(p) * p)) /
                       (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] =
        k == 0 ? -std::numeric_limits<double>::infinity()
               : (static_cast<double>(f[q] + static_cast<long long>(q) * q) -
                  static_cast<double>(f[v[static_cast<std::size_t>(k - 1)]] +
                                      static_cast<long long>(v[static_cast<std::size_t>(k - 1)]) *
                                          v[static_cast<std::size_t>(k - 1)])) /
                     (2.0 * (q - v[static_cast<std::size_t>(k - 1)]));
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  // Evaluate the envelope exactly: pick the parabola by the breakpoints, then
  // check neighbours so rounding in z never changes the integer result.
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (j < k && z[static_cast<std::size_t>(j + 1)] < q) ++j;
    long long best = kInf;
    for (int t = std::max(0, j - 1); t <= std::min(k, j + 1); ++t) {
      const int p = v[static_cast<std::size_t>(t)];
      best = std::min(best, f[p] + static_cast<long long>(q - p) * (q - p));
    }
    d[q] = best;
  }
}

long long directed_max_sq(const std::vector<long long>& dist_to_b, const LabelMask& a, int cls) {
  long long worst = 0;
  for (std::size_t i = 0; i < a.pixels(); ++i)
    if (a.values[i] == cls) worst = std::max(worst, dist_to_b[i]);
  return worst;
}

}  // namespace

LabelMask argmax_mask(const ProbMap& pred) {
  LabelMask m(pred.h, pred.w);
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    int best = 0;
    for (int c = 1; c < pred.k; ++c)
      if (pred.at(c, i) > pred.at(best, i)) best = c;
    m.values[i] = static_cast<std::uint8_t>(best);
  }
  return m;
}

double dice(const LabelMask& pred, const LabelMask& gt, int cls) {
  check_pair(pred, gt);
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    const bool x = pred.values[i] == cls;
    const bool y = gt.values[i] == cls;
    a += x;
    b += y;
    both += x && y;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<long long> squared_distance_transform(std::span<const std::uint8_t> feature, int h, int w) {
  if (feature.size() != static_cast<std::size_t>(h) * w) throw ShapeError("distance transform: size mismatch");
  std::vector<long long> g(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) g[i] = feature[i] ? 0 : kInf;
  const int n = std::max(h, w);
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  std::vector<long long> f(static_cast<std::size_t>(n));
  std::vector<long long> d(static_cast<std::size_t>(n));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = g[static_cast<std::size_t>(y) * w + x];
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) g[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    long long* row = g.data() + static_cast<std::size_t>(y) * w;
    std::copy(row, row + w, f.begin());
    edt_1d(f.data(), d.data(), w, v, z);
    std::copy(d.begin(), d.begin() + w, row);
  }
  for (long long& x : g)
    if (x >= kInf) x = -1;
  return g;
}

double hausdorff(const LabelMask& pred, const LabelMask& gt, int cls) {
  check_pair(pred, gt);
  std::vector<std::uint8_t> fa(pred.pixels());
  std::vector<std::uint8_t> fb(gt.pixels());
  bool any_a = false;
  bool any_b = false;
  for (std::size_t i = 0; i < pred.pixels(); ++i) {
    fa[i] = pred.values[i] == cls;
    fb[i] = gt.values[i] == cls;
    any_a = any_a || fa[i];
    any_b = any_b || fb[i];
  }
  if (!any_a && !any_b) return 0.0;
  if (any_a != any_b) return std::hypot(static_cast<double>(pred.h), static_cast<double>(pred.w));
  const auto to_a = squared_distance_transform(fa, pred.h, pred.w);
  const auto to_b = squared_distance_transform(fb, gt.h, gt.w);
  const long long ab = directed_max_sq(to_b, pred, cls);
  const long long ba = directed_max_sq(to_a, gt, cls);
  return std::sqrt(static_cast<double>(std::max(ab, ba)));
}

double hausdorff_brute_force(const LabelMask& pred, const LabelMask& gt, int cls) {
  check_pair(pred, gt);
  std::vector<std::pair<int, int>> a;
  std::vector<std::pair<int, int>> b;
  for (int y = 0; y < pred.h; ++y)
    for (int x = 0; x < pred.w; ++x) {
      if (pred.at(y, x) == cls) a.emplace_back(y, x);
      if (gt.at(y, x) == cls) b.emplace_back(y, x);
    }
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::hypot(static_cast<double>(pred.h), static_cast<double>(pred.w));
  auto directed = [](const auto& from, const auto& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dy = p.first - q.first;
        const double dx = p.second - q.second;
        best = std::min(best, std::sqrt(dy * dy + dx * dx));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

std::vector<double> entropy_map(const ProbMap& pred) {
  std::vector<double> e(pred.pixels(), 0.0);
  for (int c = 0; c < pred.k; ++c)
    for (std::size_t i = 0; i < pred.pixels(); ++i) {
      const double p = pred.at(c, i);
      e[i] -= p * std::log(std::max(p, kLogEps));
    }
  return e;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  for (double v : values) r.std += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(values.size()));
  return r;
}

std::vector<VolumeScore> aggregate_volumes(std::span<const SliceScore> slices) {
  std::vector<VolumeScore> out;
  std::map<int, std::size_t> index;
  std::vector<int> counts;
  for (const SliceScore& s : slices) {
    auto it = index.find(s.volume);
    if (it == index.end()) {
      it = index.emplace(s.volume, out.size()).first;
      out.push_back(VolumeScore{s.volume});
      counts.push_back(0);
    }
    VolumeScore& v = out[it->second];
    v.entropy += s.entropy;
    v.foreground_ratio += s.foreground_ratio;
    ++counts[it->second];
    if (s.has_foreground) {
      v.dsc += s.dsc;
      v.hd += s.hd;
      ++v.scored_slices;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].entropy /= counts[i];
    out[i].foreground_ratio /= counts[i];
    if (out[i].scored_slices > 0) {
      out[i].dsc /= out[i].scored_slices;
      out[i].hd /= out[i].scored_slices;
    }
  }
  return out;
}

}  // namespace srda
