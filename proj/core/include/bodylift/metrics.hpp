#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bodylift/geometry.hpp"
#include "bodylift/pose.hpp"
#include "bodylift/tensor.hpp"

namespace bodylift::metrics {

struct SimilarityTransform {
  Mat3 rotation = Mat3::Identity();
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Pose3D apply(const Pose3D& pose) const { return transform(pose, rotation, translation, scale); }
};

/// Mean Euclidean distance over joints, no alignment.
double mpjpe(const Pose3D& pred, const Pose3D& gt);
/// Per-joint distances after moving both roots to the origin.
std::vector<double> joint_errors_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index);
/// Protocol #1: root-align both poses, then mean per-joint error.
double mpjpe_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index);

/// Least-squares s, R (det +1), t minimizing Σ‖s·R·pred + t − gt‖².
/// Throws DegenerateError when either pose is coincident or collinear.
SimilarityTransform procrustes_align(const Pose3D& pred, const Pose3D& gt);
/// Protocol #2: MPJPE after the optimal similarity alignment of pred onto gt.
double mpjpe_p2(const Pose3D& pred, const Pose3D& gt);

/// Fraction of joints (over all poses, after root alignment) with error strictly below the threshold.
double pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold_mm,
           std::size_t root_index);
/// Mean PCK over the threshold grid. Throws ConfigError on an empty grid.
double auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, const std::vector<double>& thresholds,
           std::size_t root_index);

/// 0, 5, ..., 150 mm.
std::vector<double> default_auc_grid();

struct ActionStats {
  double mpjpe_p1 = 0.0;
  double mpjpe_p2 = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  double mpjpe_p1 = 0.0;
  double mpjpe_p2 = 0.0;
  double pck = 0.0;
  double auc = 0.0;
  double pck_threshold = 150.0;
  std::map<std::string, ActionStats> per_action;  // sorted by action name
  std::size_t n_samples = 0;
};

struct EvalOptions {
  double pck_threshold = 150.0;
  std::vector<double> auc_thresholds = default_auc_grid();
  std::size_t root_index = 0;
  std::size_t batch_size = 256;
};

/// Maps a normalized B×2J batch to a normalized B×3J batch.
using Predictor = std::function<Tensor(const Tensor&)>;

/// Runs the predictor over `data`, denormalizes to mm, root-centers, and
/// scores every protocol. Throws FormatError if any sample lacks 3D.
EvalReport evaluate(const Predictor& predictor, const Dataset& data, const NormStats& stats,
                    const EvalOptions& options = {});

/// Denormalized, root-centered predictions for every sample of `data`.
std::vector<Pose3D> predict_poses(const Predictor& predictor, const Dataset& data, const NormStats& stats,
                                  std::size_t root_index, std::size_t batch_size = 256);

std::string report_json(const EvalReport& report, int indent = 2);
std::string report_table(const EvalReport& report);

}  // namespace bodylift::metrics
