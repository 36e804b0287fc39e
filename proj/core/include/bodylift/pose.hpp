#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "bodylift/geometry.hpp"
#include "bodylift/skeleton.hpp"
#include "bodylift/tensor.hpp"

namespace bodylift {

/// Pinhole camera. A world point X maps to camera coordinates R·X + t.
struct Camera {
  double focal = 1000.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct PoseSample {
  Pose2D pose2d;
  std::optional<Pose3D> pose3d;  // mm, root-relative
  std::string subject;
  std::string action;
  std::optional<Camera> camera;

  std::size_t joint_count() const noexcept { return pose2d.size(); }
  bool labeled() const noexcept { return pose3d.has_value(); }
};

using Dataset = std::vector<PoseSample>;

/// Reads JSON Lines. 3D poses are root-centered on load. Errors carry the
/// 1-based line number.
Dataset load_dataset(const std::filesystem::path& path, std::size_t root_index = 0);
void save_dataset(const Dataset& samples, const std::filesystem::path& path);
std::string to_json_line(const PoseSample& sample);
PoseSample parse_json_line(const std::string& line, std::size_t root_index = 0);

/// Translates every joint so the root sits at the origin.
Pose3D root_center(const Pose3D& pose, std::size_t root_index);

/// Per-coordinate z-scoring statistics over flattened 2D (2J) and 3D (3J) poses.
struct NormStats {
  std::vector<double> mean2d, std2d;
  std::vector<double> mean3d, std3d;

  static constexpr double kMinStd = 1e-8;

  std::size_t joint_count() const noexcept { return mean2d.size() / 2; }
  bool operator==(const NormStats&) const = default;
};

/// Statistics from a training split. Coordinates with std below kMinStd are
/// clamped to kMinStd; the number of clamped coordinates is reported through
/// `clamped` when given. Samples without 3D contribute to the 2D statistics only.
NormStats compute_norm_stats(const Dataset& samples, std::size_t* clamped = nullptr);

std::vector<double> flatten(const Pose2D& pose);
std::vector<double> flatten(const Pose3D& pose);
Pose3D unflatten3d(std::span<const double> values);

std::vector<double> normalize2d(const Pose2D& pose, const NormStats& stats);
std::vector<double> normalize3d(const Pose3D& pose, const NormStats& stats);
/// Normalizes both 2D and (if present) 3D of a sample.
struct NormalizedSample {
  std::vector<double> pose2d;
  std::optional<std::vector<double>> pose3d;
};
NormalizedSample normalize(const PoseSample& sample, const NormStats& stats);
Pose2D denormalize2d(std::span<const double> values, const NormStats& stats);
Pose3D denormalize3d(std::span<const double> values, const NormStats& stats);

/// Stacks normalized samples (selected by `indices`) into B×2J and B×3J matrices.
Tensor batch2d(const Dataset& samples, std::span<const std::size_t> indices, const NormStats& stats);
Tensor batch3d(const Dataset& samples, std::span<const std::size_t> indices, const NormStats& stats);

/// Cross-action split: samples whose action is in `train_actions` go to the
/// first dataset, the rest to the second. Throws ConfigError if either is empty.
std::pair<Dataset, Dataset> split_cross_action(const Dataset& samples, const std::set<std::string>& train_actions);

std::set<std::string> actions_of(const Dataset& samples);

}  // namespace bodylift
