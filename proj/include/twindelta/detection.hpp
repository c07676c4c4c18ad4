#pragma once

// Crops, detector ports, and mAP evaluation with greedy confidence-ordered
// matching and all-points interpolated AP.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twindelta/scene.hpp"

namespace twindelta {

class AdapterClient;

/// Pixel sub-rectangle [floor(x_min), ceil(x_max)) x [floor(y_min), ceil(y_max)).
/// Throws BoxOutOfFrame if the box is malformed or leaves the frame.
GrayFrame crop(const GrayFrame& frame, const BoundingBox& box);

struct LabeledBox {
  std::string label;
  BoundingBox bbox;
};

struct ImagePredictions {
  std::string image_id;
  std::vector<Detection> detections;
};

struct ImageGroundTruth {
  std::string image_id;
  std::vector<LabeledBox> boxes;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

struct ClassReport {
  std::size_t ground_truth = 0;
  std::size_t predictions = 0;
  std::size_t true_positives = 0;
  std::optional<double> ap;  // empty when the class has no ground truth
  std::vector<PrPoint> curve;
};

struct EvalReport {
  std::map<std::string, ClassReport> classes;
  std::optional<double> map;  // mean AP over classes with ground truth
  std::vector<std::string> excluded;  // predicted classes without ground truth
};

/// Predictions and ground truth are paired by image_id; both sides must list
/// the same images. Throws InvalidArgument.
EvalReport evaluate_map(const std::vector<ImagePredictions>& predictions,
                        const std::vector<ImageGroundTruth>& ground_truth,
                        double iou_threshold = 0.5);

/// All-points interpolated AP from a ranked TP/FP sequence.
double average_precision(const std::vector<bool>& ranked_true_positive, std::size_t positives,
                         std::vector<PrPoint>* curve = nullptr);

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const GrayFrame& frame) = 0;
};

/// Emits the ground-truth boxes of a frame, optionally jittered by uniform
/// noise of up to jitter_px per edge and dropped with probability dropout.
/// Confidence is 1 minus the normalised jitter magnitude. Jitter never pushes
/// a box outside the frame.
class OracleDetector : public Detector {
 public:
  using Lookup = std::function<std::vector<LabeledBox>(const GrayFrame&)>;

  OracleDetector(Lookup truth, double jitter_px, double dropout, std::uint64_t seed);
  std::vector<Detection> detect(const GrayFrame& frame) override;

 private:
  Lookup truth_;
  double jitter_;
  double dropout_;
  std::uint64_t seed_;
};

class AdapterDetector : public Detector {
 public:
  explicit AdapterDetector(std::shared_ptr<AdapterClient> client);
  std::vector<Detection> detect(const GrayFrame& frame) override;

 private:
  std::shared_ptr<AdapterClient> client_;
};

}  // namespace twindelta
