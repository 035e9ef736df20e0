/* Copyright 2026 The LVW Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "core/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/image.hpp"
#include "core/objectives.hpp"
#include "core/rng.hpp"

namespace lvw {

int64_t BinaryMask::count_true() const {
  int64_t n = 0;
  for (uint8_t v : values) n += v;
  return n;
}

BinaryMask quantile_mask(const Tensor& map, double q) {
  if (q < 0.0 || q >= 100.0) throw ArgumentError("quantile_mask: q must be in [0,100)");
  if (map.rank() != 2 || map.size() == 0)
    throw ArgumentError("quantile_mask expects a nonempty 2-d map");
  if (!map.all_finite()) throw ArgumentError("quantile_mask: non-finite entries");

  int64_t n = map.size();
  std::vector<double> sorted(map.data(), map.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double rank = q / 100.0 * double(n - 1);
  auto lo = static_cast<int64_t>(rank);
  double frac = rank - double(lo);
  double threshold = sorted[size_t(lo)];
  if (frac > 0.0 && lo + 1 < n)
    threshold += frac * (sorted[size_t(lo + 1)] - sorted[size_t(lo)]);

  BinaryMask mask;
  mask.height = map.dim(0);
  mask.width = map.dim(1);
  mask.q = q;
  mask.values.resize(size_t(n));
  for (int64_t i = 0; i < n; ++i) mask.values[size_t(i)] = map[i] >= threshold ? 1 : 0;
  return mask;
}

double iou_coverage(const Tensor& attention, const Tensor& combined, double q) {
  if (!attention.same_shape(combined))
    throw ArgumentError("iou_coverage: resolution mismatch");
  BinaryMask a = quantile_mask(attention, q);
  BinaryMask b = quantile_mask(combined, q);
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.values.size(); ++i) {
    inter += a.values[i] & b.values[i];
    uni += a.values[i] | b.values[i];
  }
  if (uni == 0) return 1.0;  // both masks empty: identical (non-)attention
  return double(inter) / double(uni);
}

// ---------------------------------------------------------------------------
// dataset-level evaluation
// ---------------------------------------------------------------------------

namespace {

// Everything derived from one test image that the sweeps want to reuse.
struct SampleArtifacts {
  int predicted = -1;
  Tensor scores;                      // [M]
  std::vector<Tensor> upsampled;      // M maps at image resolution
  Tensor attention;                   // [R,R]; empty when excluded
  bool excluded = false;
};

SampleArtifacts build_artifacts(const LvwModel& model, const BaseModel* base,
                                const EvalSample& sample, ClassSource source,
                                AttentionCache& cache) {
  SampleArtifacts art;
  LvwForward f = model.forward(sample.image, /*with_grad=*/false);
  art.scores = f.scores->value;
  art.predicted = argmax_index(predict(art.scores, model.head(),
                                       model.config().use_sigmoid_head));
  int res = model.config().input_resolution;
  int m = model.num_words();
  int h = f.act->value.dim(1), w = f.act->value.dim(2);
  art.upsampled.reserve(size_t(m));
  for (int j = 0; j < m; ++j) {
    Tensor grid({h, w});
    std::copy_n(f.act->value.data() + size_t(j) * h * w, size_t(h) * w, grid.data());
    art.upsampled.push_back(resample_bilinear(grid, res, res));
  }

  if (cache.has(sample.id)) {
    art.attention = cache.get(sample.id).values;
  } else if (base != nullptr) {
    int class_id = source == ClassSource::kGroundTruth ? sample.label : art.predicted;
    if (class_id < 0) throw ArgumentError("evaluate: missing label for ground_truth source");
    AttentionMap am = gradcam(*base, sample.image, class_id, res);
    cache.put(sample.id, am);
    art.attention = std::move(am.values);
  } else {
    art.excluded = true;
  }
  return art;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / double(xs.size());
}

}  // namespace

EvalReport evaluate(const LvwModel& model, const BaseModel* base,
                    const std::vector<EvalSample>& samples, int k, double q,
                    ClassSource source, AttentionCache& cache) {
  if (samples.empty()) throw ArgumentError("evaluate: empty test set");
  if (k <= 0 || k > model.num_words()) throw ArgumentError("evaluate: k out of range");

  EvalReport report;
  report.k = k;
  report.q = q;
  report.num_samples = static_cast<int>(samples.size());

  std::vector<SampleArtifacts> arts(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    arts[i] = build_artifacts(model, base, samples[i], source, cache);
  }
  cache.save_manifest();

  int correct = 0;
  double iou_sum = 0.0;
  int included = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    EvalRow row;
    row.id = samples[i].id;
    row.label = samples[i].label;
    row.predicted = arts[i].predicted;
    if (row.predicted == row.label) ++correct;
    if (arts[i].excluded) {
      row.excluded = true;
      ++report.num_excluded;
    } else {
      Tensor combined = topk_combined_heatmap(arts[i].upsampled, arts[i].scores, k);
      row.iou = iou_coverage(arts[i].attention, combined, q);
      iou_sum += row.iou;
      ++included;
    }
    report.rows.push_back(std::move(row));
  }
  report.accuracy = double(correct) / double(samples.size());
  report.mean_iou = included > 0 ? iou_sum / double(included) : 0.0;
  return report;
}

std::vector<QuantileSweepRow> quantile_sweep(const LvwModel& model, const BaseModel* base,
                                             const std::vector<EvalSample>& samples, int k,
                                             const std::vector<double>& qs,
                                             ClassSource source, AttentionCache& cache) {
  if (qs.empty()) throw ArgumentError("quantile_sweep: empty quantile list");
  if (samples.empty()) throw ArgumentError("quantile_sweep: empty test set");
  for (double q : qs) {
    if (q < 0.0 || q >= 100.0) throw ArgumentError("quantile_sweep: q out of range");
  }

  // Heatmaps and attention are q-independent; build once.
  std::vector<Tensor> combined(samples.size());
  std::vector<Tensor> attention(samples.size());
  std::vector<char> included(samples.size(), 0);
  for (size_t i = 0; i < samples.size(); ++i) {
    SampleArtifacts art = build_artifacts(model, base, samples[i], source, cache);
    if (art.excluded) continue;
    combined[i] = topk_combined_heatmap(art.upsampled, art.scores, k);
    attention[i] = std::move(art.attention);
    included[i] = 1;
  }
  cache.save_manifest();

  std::vector<QuantileSweepRow> out;
  for (double q : qs) {
    double acc = 0.0;
    int n = 0;
    for (size_t i = 0; i < samples.size(); ++i) {
      if (!included[i]) continue;
      acc += iou_coverage(attention[i], combined[i], q);
      ++n;
    }
    out.push_back({q, n > 0 ? acc / n : 0.0});
  }
  return out;
}

std::vector<TopkSweepRow> topk_sweep(const LvwModel& model, const BaseModel* base,
                                     const std::vector<EvalSample>& samples,
                                     const std::vector<int>& ks, double q,
                                     ClassSource source, AttentionCache& cache,
                                     int subsets, double subset_fraction,
                                     uint64_t subset_seed) {
  if (ks.empty()) throw ArgumentError("topk_sweep: empty k list");
  if (samples.empty()) throw ArgumentError("topk_sweep: empty test set");
  for (int k : ks) {
    if (k < 1 || k > model.num_words()) throw ArgumentError("topk_sweep: k out of range");
  }

  std::vector<SampleArtifacts> arts(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    arts[i] = build_artifacts(model, base, samples[i], source, cache);
  }
  cache.save_manifest();

  int correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (arts[i].predicted == samples[i].label) ++correct;
  }
  // Prediction uses all M similarity scores; k only changes the heatmap, so
  // accuracy is identical across the sweep by construction.
  double accuracy = double(correct) / double(samples.size());

  std::vector<TopkSweepRow> out;
  for (int k : ks) {
    std::vector<double> ious;
    std::vector<size_t> included_idx;
    for (size_t i = 0; i < samples.size(); ++i) {
      if (arts[i].excluded) continue;
      Tensor combined = topk_combined_heatmap(arts[i].upsampled, arts[i].scores, k);
      ious.push_back(iou_coverage(arts[i].attention, combined, q));
      included_idx.push_back(i);
    }
    TopkSweepRow row;
    row.k = k;
    row.accuracy = accuracy;
    row.mean_iou = mean_of(ious);
    if (subsets > 1 && ious.size() > 1) {
      Rng rng(subset_seed);
      std::vector<double> subset_means;
      size_t take = std::max<size_t>(1, size_t(std::llround(subset_fraction *
                                                            double(ious.size()))));
      for (int s = 0; s < subsets; ++s) {
        std::vector<size_t> order(ious.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        double acc = 0.0;
        for (size_t t = 0; t < take; ++t) acc += ious[order[t]];
        subset_means.push_back(acc / double(take));
      }
      double mu = mean_of(subset_means);
      double var = 0.0;
      for (double v : subset_means) var += (v - mu) * (v - mu);
      row.iou_std = std::sqrt(var / double(subset_means.size()));
    }
    out.push_back(row);
  }
  return out;
}

}  // namespace lvw
