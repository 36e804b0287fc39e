#pragma once

#include <cstddef>
#include <vector>

#include "bodylift/pose.hpp"
#include "bodylift/random.hpp"
#include "bodylift/skeleton.hpp"

namespace bodylift {

/// Places each joint at parent + (composed ancestor rotations)·(rest direction · bone length).
/// `joint_rotations` holds one local rotation per joint; the root's rotation
/// orients the whole body. The root lands at the origin.
Pose3D forward_kinematics(const Skeleton& skeleton, const std::vector<Mat3>& joint_rotations);

/// u = f·x/z, v = f·y/z with (x, y, z) = R·X + t. Throws DegenerateError on z ≤ 0.
Pose2D project_pinhole(const Pose3D& pose, const Camera& camera);

struct CameraDistribution {
  double focal = 1000.0;
  double min_distance = 4000.0;   // mm
  double max_distance = 6000.0;
  double max_elevation_deg = 15.0;
};

struct SynthConfig {
  double max_joint_angle_deg = 60.0;
  // Per-sample rotations are the action's posture plus a Gaussian mix of
  // `motion_modes` action-specific joint-rotation patterns (each scaled to
  // `mode_scale` rad per joint) plus independent `pose_noise` rad jitter.
  std::size_t motion_modes = 4;
  double mode_scale = 0.35;
  double pose_noise = 0.05;
  std::vector<std::string> actions{"Directions", "Eating", "Greeting", "Phoning",
                                   "Posing", "Sitting", "Walking", "Waiting"};
  std::vector<std::string> subjects{"S1", "S5", "S6", "S7", "S8"};
  // Per-subject uniform bone scale range.
  double min_bone_scale = 0.9;
  double max_bone_scale = 1.1;
  CameraDistribution cameras;
  // Subject root placed uniformly in a horizontal disk of this radius (mm)
  // around the point the cameras aim at.
  double max_root_offset = 500.0;
  int max_retries = 16;
  // Seeds the action postures and subject proportions, shared by every
  // dataset drawn with the same structure seed (train and test alike).
  std::uint64_t structure_seed = 7;
};

/// Draws `n` poses: per-joint axis-angle rotations around an action-specific
/// posture moved along a few correlated motion modes, clamped to the angle limit, through forward kinematics, then a
/// camera on an azimuth ring. Stored 3D is camera-frame and root-relative; the
/// stored camera (which absorbs the subject's placement offset) reproduces the
/// 2D from the root-centered world pose Rᵀ·pose3d.
Dataset synth_dataset(const Skeleton& skeleton, std::size_t n, Rng& rng, const SynthConfig& config = {});

/// Camera looking at the origin from the given azimuth/elevation (radians) and distance.
Camera orbit_camera(double azimuth, double elevation, double distance, double focal);

}  // namespace bodylift
