#include "twindelta/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "twindelta/adapter.hpp"
#include "twindelta/error.hpp"
#include "twindelta/random.hpp"

namespace twindelta {

GrayFrame crop(const GrayFrame& frame, const BoundingBox& box) {
  if (!box.well_formed() || !box.within(frame.width(), frame.height())) {
    throw Error(ErrorCode::BoxOutOfFrame, "box does not fit a " + std::to_string(frame.width()) +
                                              "x" + std::to_string(frame.height()) + " frame");
  }
  const int x0 = static_cast<int>(std::floor(box.x_min));
  const int y0 = static_cast<int>(std::floor(box.y_min));
  const int x1 = static_cast<int>(std::ceil(box.x_max));
  const int y1 = static_cast<int>(std::ceil(box.y_max));
  std::vector<double> px;
  px.reserve(static_cast<std::size_t>(x1 - x0) * (y1 - y0));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) px.push_back(frame.at(x, y));
  }
  return GrayFrame(x1 - x0, y1 - y0, std::move(px), frame.index());
}

double average_precision(const std::vector<bool>& ranked_true_positive, std::size_t positives,
                         std::vector<PrPoint>* curve) {
  if (positives == 0) throw Error(ErrorCode::InvalidArgument, "AP needs at least one positive");
  const std::size_t n = ranked_true_positive.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_true_positive[i]) ++tp;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    if (curve) {
      curve->push_back({static_cast<double>(tp) / static_cast<double>(positives), precision[i]});
    }
  }
  // Area under the monotone envelope: recall steps by 1/positives at each true positive.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (ranked_true_positive[i]) sum += precision[i];
  }
  return sum / static_cast<double>(positives);
}

EvalReport evaluate_map(const std::vector<ImagePredictions>& predictions,
                        const std::vector<ImageGroundTruth>& ground_truth, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "IoU threshold must lie in (0,1]");
  }
  std::map<std::string, std::size_t> gt_index;
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    if (!gt_index.emplace(ground_truth[i].image_id, i).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate image id " + ground_truth[i].image_id);
    }
  }
  std::set<std::string> seen;
  for (const auto& p : predictions) {
    if (!gt_index.contains(p.image_id)) {
      throw Error(ErrorCode::InvalidArgument, "no ground truth for image " + p.image_id);
    }
    if (!seen.insert(p.image_id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate image id " + p.image_id);
    }
  }
  if (seen.size() != ground_truth.size()) {
    throw Error(ErrorCode::InvalidArgument, "predictions do not cover every image");
  }

  struct Ranked {
    double confidence;
    std::size_t image;  // index into ground_truth
    const BoundingBox* box;
  };
  std::map<std::string, std::vector<Ranked>> by_class;
  EvalReport report;
  for (const auto& gt : ground_truth) {
    for (const auto& b : gt.boxes) ++report.classes[b.label].ground_truth;
  }
  for (const auto& p : predictions) {
    const std::size_t img = gt_index.at(p.image_id);
    for (const auto& d : p.detections) {
      by_class[d.label].push_back({d.confidence, img, &d.bbox});
      ++report.classes[d.label].predictions;
    }
  }

  double sum = 0;
  std::size_t counted = 0;
  for (auto& [label, cls] : report.classes) {
    if (cls.ground_truth == 0) {
      report.excluded.push_back(label);
      continue;
    }
    auto& ranked = by_class[label];
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
    std::map<std::size_t, std::vector<bool>> used;
    std::vector<bool> tp_flags;
    tp_flags.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto& boxes = ground_truth[r.image].boxes;
      auto& taken = used[r.image];
      taken.resize(boxes.size(), false);
      double best = -1;
      std::size_t best_j = boxes.size();
      for (std::size_t j = 0; j < boxes.size(); ++j) {
        if (taken[j] || boxes[j].label != label) continue;
        const double v = iou(*r.box, boxes[j].bbox);
        if (v >= iou_threshold && v > best) {
          best = v;
          best_j = j;
        }
      }
      if (best_j < boxes.size()) {
        taken[best_j] = true;
        ++cls.true_positives;
      }
      tp_flags.push_back(best_j < boxes.size());
    }
    cls.ap = average_precision(tp_flags, cls.ground_truth, &cls.curve);
    sum += *cls.ap;
    ++counted;
  }
  if (counted > 0) report.map = sum / static_cast<double>(counted);
  return report;
}

OracleDetector::OracleDetector(Lookup truth, double jitter_px, double dropout, std::uint64_t seed)
    : truth_(std::move(truth)), jitter_(jitter_px), dropout_(dropout), seed_(seed) {
  if (!(jitter_px >= 0.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be >= 0");
  if (!(dropout >= 0.0 && dropout <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout must lie in [0,1]");
  }
}

std::vector<Detection> OracleDetector::detect(const GrayFrame& frame) {
  NormalStream rng(mix_seed(seed_, static_cast<std::uint64_t>(frame.index())));
  std::vector<Detection> out;
  for (const auto& t : truth_(frame)) {
    if (dropout_ > 0.0 && rng.uniform() < dropout_) continue;
    Detection d{t.label, t.bbox, 1.0};
    if (jitter_ > 0.0) {
      double* edges[4] = {&d.bbox.x_min, &d.bbox.y_min, &d.bbox.x_max, &d.bbox.y_max};
      double moved = 0;
      for (double* e : edges) {
        const double shift = (2.0 * rng.uniform() - 1.0) * jitter_;
        *e += shift;
        moved += std::abs(shift);
      }
      d.bbox.x_min = std::clamp(d.bbox.x_min, 0.0, static_cast<double>(frame.width()));
      d.bbox.x_max = std::clamp(d.bbox.x_max, 0.0, static_cast<double>(frame.width()));
      d.bbox.y_min = std::clamp(d.bbox.y_min, 0.0, static_cast<double>(frame.height()));
      d.bbox.y_max = std::clamp(d.bbox.y_max, 0.0, static_cast<double>(frame.height()));
      if (!d.bbox.well_formed()) continue;
      d.confidence = std::clamp(1.0 - moved / (4.0 * jitter_), 0.0, 1.0);
    }
    out.push_back(std::move(d));
  }
  return out;
}

AdapterDetector::AdapterDetector(std::shared_ptr<AdapterClient> client)
    : client_(std::move(client)) {
  if (!client_) throw Error(ErrorCode::InvalidArgument, "adapter client is null");
}

std::vector<Detection> AdapterDetector::detect(const GrayFrame& frame) {
  return client_->detect(frame);
}

}  // namespace twindelta
