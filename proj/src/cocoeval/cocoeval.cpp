// Copyright 2026 The groupdet Authors.
// SPDX-License-Identifier: Apache-2.0

#include "cocoeval/cocoeval.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "common/error.hpp"

namespace groupdet::cocoeval {

using nlohmann::json;

json to_json(const EvalReport& r) {
  return {{"AP", r.ap}, {"AP50", r.ap50}, {"AP75", r.ap75},
          {"APs", r.ap_s}, {"APm", r.ap_m}, {"APl", r.ap_l}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.ap = j.at("AP").get<double>();
  r.ap50 = j.at("AP50").get<double>();
  r.ap75 = j.at("AP75").get<double>();
  r.ap_s = j.at("APs").get<double>();
  r.ap_m = j.at("APm").get<double>();
  r.ap_l = j.at("APl").get<double>();
  return r;
}

namespace {

constexpr int kRecallPoints = 101;

bool in_range(double area, AreaRange r) { return area >= r.lo && area < r.hi; }

// Matching outcome of one image for one category at every threshold.
struct ImageEval {
  std::vector<double> scores;             // detections, descending score
  std::vector<std::vector<char>> matched; // [threshold][det]
  std::vector<std::vector<char>> ignored; // [threshold][det]
  int gt_count = 0;                       // non-ignored ground truth
};

ImageEval evaluate_image(std::vector<const slicer::AnnotationEntry*> gts,
                         std::vector<const Detection*> dets, AreaRange area,
                         const std::vector<double>& thresholds) {
  ImageEval out;
  std::vector<char> gt_ignore(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g)
    gt_ignore[g] = gts[g]->iscrowd || !in_range(gts[g]->area, area);
  // Non-ignored ground truth first, original order otherwise.
  std::vector<std::size_t> gorder(gts.size());
  std::iota(gorder.begin(), gorder.end(), std::size_t{0});
  std::stable_sort(gorder.begin(), gorder.end(),
                   [&](std::size_t a, std::size_t b) { return gt_ignore[a] < gt_ignore[b]; });
  std::vector<const slicer::AnnotationEntry*> g_sorted;
  std::vector<char> g_ig;
  for (std::size_t i : gorder) {
    g_sorted.push_back(gts[i]);
    g_ig.push_back(gt_ignore[i]);
    if (!gt_ignore[i]) ++out.gt_count;
  }

  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection* a, const Detection* b) { return a->score > b->score; });
  if (dets.size() > static_cast<std::size_t>(kMaxDetsPerImage)) dets.resize(kMaxDetsPerImage);

  const std::size_t nd = dets.size(), ng = g_sorted.size();
  std::vector<double> ious(nd * ng);
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& bb = g_sorted[g]->bbox;
      ious[d * ng + g] = iou(to_box(dets[d]->bbox), Box{bb[0], bb[1], bb[0] + bb[2], bb[1] + bb[3]});
    }

  for (const Detection* d : dets) out.scores.push_back(d->score);
  for (double t : thresholds) {
    std::vector<char> gt_taken(ng, 0), dm(nd, 0), di(nd, 0);
    for (std::size_t d = 0; d < nd; ++d) {
      double best = std::min(t, 1.0 - 1e-10);
      int m = -1;
      for (std::size_t g = 0; g < ng; ++g) {
        if (gt_taken[g] && !g_sorted[g]->iscrowd) continue;
        // Once matched to a regular gt, stop at the ignored tail.
        if (m > -1 && !g_ig[m] && g_ig[g]) break;
        if (ious[d * ng + g] < best) continue;
        best = ious[d * ng + g];
        m = static_cast<int>(g);
      }
      if (m == -1) continue;
      di[d] = g_ig[m];
      dm[d] = 1;
      gt_taken[m] = 1;
    }
    for (std::size_t d = 0; d < nd; ++d)
      if (!dm[d] && !in_range(dets[d]->bbox.area(), area)) di[d] = 1;
    out.matched.push_back(std::move(dm));
    out.ignored.push_back(std::move(di));
  }
  return out;
}

// 101-point interpolated precision averaged over the recall grid.
double interpolated_ap(const std::vector<ImageEval>& evals, std::size_t t) {
  int npig = 0;
  std::vector<double> scores;
  std::vector<char> tp, ignore;
  for (const auto& e : evals) {
    npig += e.gt_count;
    scores.insert(scores.end(), e.scores.begin(), e.scores.end());
    tp.insert(tp.end(), e.matched[t].begin(), e.matched[t].end());
    ignore.insert(ignore.end(), e.ignored[t].begin(), e.ignored[t].end());
  }
  if (npig == 0) return -1;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> recall, precision;
  double ctp = 0, cfp = 0;
  for (std::size_t i : order) {
    if (ignore[i]) continue;
    if (tp[i]) ctp += 1;
    else cfp += 1;
    recall.push_back(ctp / npig);
    precision.push_back(ctp / (ctp + cfp));
  }
  for (std::size_t i = precision.size(); i-- > 1;)
    if (precision[i] > precision[i - 1]) precision[i - 1] = precision[i];

  double sum = 0;
  for (int r = 0; r < kRecallPoints; ++r) {
    const double thr = r / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), thr);
    if (it != recall.end()) sum += precision[it - recall.begin()];
  }
  return sum / kRecallPoints;
}

void check_image_ids(const slicer::DatasetManifest& gts, const DetectionsByImage& dets) {
  std::set<std::int64_t> ids;
  for (const auto& im : gts.images) ids.insert(im.id);
  for (const auto& [id, list] : dets)
    if (!ids.count(id)) throw UnknownImageId("detections reference image " + std::to_string(id));
}

// AP per threshold for one area range, averaged over categories with gt.
std::vector<double> per_threshold_ap(const slicer::DatasetManifest& gts, const DetectionsByImage& dets,
                                     const std::vector<double>& thresholds, AreaRange area) {
  std::set<int> categories;
  for (const auto& c : gts.categories) categories.insert(c.id);
  for (const auto& a : gts.annotations) categories.insert(a.category_id);

  std::map<std::int64_t, std::vector<const slicer::AnnotationEntry*>> gt_by_image;
  for (const auto& a : gts.annotations) gt_by_image[a.image_id].push_back(&a);

  std::vector<double> sums(thresholds.size(), 0.0);
  std::vector<int> counts(thresholds.size(), 0);
  for (int cat : categories) {
    std::vector<ImageEval> evals;
    for (const auto& im : gts.images) {
      std::vector<const slicer::AnnotationEntry*> g;
      for (const auto* a : gt_by_image[im.id])
        if (a->category_id == cat) g.push_back(a);
      std::vector<const Detection*> d;
      if (auto it = dets.find(im.id); it != dets.end())
        for (const auto& det : it->second)
          if (det.category_id == cat) d.push_back(&det);
      if (g.empty() && d.empty()) continue;
      evals.push_back(evaluate_image(std::move(g), std::move(d), area, thresholds));
    }
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      const double ap = interpolated_ap(evals, t);
      if (ap < 0) continue;
      sums[t] += ap;
      ++counts[t];
    }
  }
  std::vector<double> out(thresholds.size(), -1.0);
  for (std::size_t t = 0; t < thresholds.size(); ++t)
    if (counts[t]) out[t] = sums[t] / counts[t];
  return out;
}

double mean_valid(const std::vector<double>& v) {
  double s = 0;
  int n = 0;
  for (double x : v)
    if (x > -1) {
      s += x;
      ++n;
    }
  return n ? s / n : -1.0;
}

}  // namespace

double average_precision(const slicer::DatasetManifest& gts, const DetectionsByImage& dets,
                         double iou_thresh, AreaRange area) {
  check_image_ids(gts, dets);
  return per_threshold_ap(gts, dets, {iou_thresh}, area).front();
}

EvalReport evaluate(const slicer::DatasetManifest& gts, const DetectionsByImage& dets) {
  check_image_ids(gts, dets);
  std::vector<double> thresholds;
  for (int k = 0; k < 10; ++k) thresholds.push_back(iou_threshold(k));

  EvalReport r;
  const auto all = per_threshold_ap(gts, dets, thresholds, kAreaAll);
  r.ap = mean_valid(all);
  r.ap50 = all[0];
  r.ap75 = all[5];
  r.ap_s = mean_valid(per_threshold_ap(gts, dets, thresholds, kAreaSmall));
  r.ap_m = mean_valid(per_threshold_ap(gts, dets, thresholds, kAreaMedium));
  r.ap_l = mean_valid(per_threshold_ap(gts, dets, thresholds, kAreaLarge));
  return r;
}

}  // namespace groupdet::cocoeval
