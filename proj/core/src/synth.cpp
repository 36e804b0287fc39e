#include "bodylift/synth.hpp"

#include <cmath>
#include <numbers>

#include "bodylift/error.hpp"

namespace bodylift {

Pose3D forward_kinematics(const Skeleton& skeleton, const std::vector<Mat3>& joint_rotations) {
  const std::size_t j = skeleton.joint_count();
  if (joint_rotations.size() != j) throw ShapeError("forward_kinematics: one rotation per joint required");
  for (std::size_t i = 0; i < j; ++i) {
    if (!is_rotation(joint_rotations[i], 1e-9)) {
      throw ConfigError("forward_kinematics: rotation of joint '" + skeleton.joint_names[i] + "' is not orthonormal");
    }
  }
  Pose3D pose(j, Vec3::Zero());
  std::vector<Mat3> global(j, Mat3::Identity());
  for (std::size_t i : skeleton.topological_order()) {
    if (i == skeleton.root_index) {
      global[i] = joint_rotations[i];
      continue;
    }
    const auto p = std::size_t(skeleton.parents[i]);
    pose[i] = pose[p] + global[p] * (skeleton.rest_directions[i] * skeleton.bone_lengths[i]);
    global[i] = global[p] * joint_rotations[i];
  }
  return pose;
}

Pose2D project_pinhole(const Pose3D& pose, const Camera& camera) {
  Pose2D out;
  out.reserve(pose.size());
  for (const auto& x : pose) {
    const Vec3 c = camera.rotation * x + camera.translation;
    if (!(c.z() > 0.0)) throw DegenerateError("project_pinhole: joint at non-positive depth");
    out.emplace_back(camera.focal * c.x() / c.z(), camera.focal * c.y() / c.z());
  }
  return out;
}

Camera orbit_camera(double azimuth, double elevation, double distance, double focal) {
  const Vec3 centre = distance * Vec3(std::cos(elevation) * std::sin(azimuth), std::sin(elevation),
                                      std::cos(elevation) * std::cos(azimuth));
  const Vec3 forward = (-centre).normalized();
  const Vec3 down(0.0, -1.0, 0.0);
  const Vec3 right = down.cross(forward).normalized();
  const Vec3 image_down = forward.cross(right);
  Camera cam;
  cam.focal = focal;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = image_down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -(cam.rotation * centre);
  return cam;
}

namespace {

Vec3 random_in_ball(Rng& rng, double radius) {
  Vec3 v(normal(rng), normal(rng), normal(rng));
  const double n = v.norm();
  if (n == 0.0) return Vec3::Zero();
  return v / n * radius * std::cbrt(uniform(rng, 0.0, 1.0));
}

Vec3 clamp_norm(const Vec3& v, double limit) {
  const double n = v.norm();
  return n > limit ? Vec3(v * (limit / n)) : v;
}

}  // namespace

Dataset synth_dataset(const Skeleton& skeleton, std::size_t n, Rng& rng, const SynthConfig& config) {
  skeleton.validate();
  if (config.actions.empty() || config.subjects.empty()) throw ConfigError("synth needs actions and subjects");
  const std::size_t j = skeleton.joint_count();
  const double limit = config.max_joint_angle_deg * std::numbers::pi / 180.0;

  Rng structure = make_rng(config.structure_seed, 0x5eed);
  std::vector<std::vector<Vec3>> postures(config.actions.size(), std::vector<Vec3>(j));
  for (auto& posture : postures) {
    for (auto& v : posture) v = random_in_ball(structure, 0.6 * limit);
  }
  // modes[a][m][i]: rotation of joint i along motion mode m of action a.
  std::vector<std::vector<std::vector<Vec3>>> modes(
      config.actions.size(), std::vector<std::vector<Vec3>>(config.motion_modes, std::vector<Vec3>(j)));
  for (auto& action_modes : modes) {
    for (auto& mode : action_modes) {
      for (auto& v : mode) v = config.mode_scale * Vec3(normal(structure), normal(structure), normal(structure)) / std::sqrt(3.0);
    }
  }
  std::vector<std::vector<double>> subject_scale(config.subjects.size(), std::vector<double>(j));
  for (auto& scales : subject_scale) {
    for (auto& s : scales) s = uniform(structure, config.min_bone_scale, config.max_bone_scale);
  }

  const auto& cams = config.cameras;
  const double max_elev = cams.max_elevation_deg * std::numbers::pi / 180.0;

  Dataset out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto a = std::uniform_int_distribution<std::size_t>(0, config.actions.size() - 1)(rng);
    const auto s = std::uniform_int_distribution<std::size_t>(0, config.subjects.size() - 1)(rng);

    Skeleton body = skeleton;
    for (std::size_t i = 0; i < j; ++i) body.bone_lengths[i] *= subject_scale[s][i];

    std::vector<double> coef(config.motion_modes);
    for (auto& c : coef) c = normal(rng);
    std::vector<Mat3> rotations(j);
    for (std::size_t i = 0; i < j; ++i) {
      Vec3 r = postures[a][i];
      for (std::size_t m = 0; m < coef.size(); ++m) r += coef[m] * modes[a][m][i];
      r += config.pose_noise * Vec3(normal(rng), normal(rng), normal(rng));
      rotations[i] = axis_angle_to_matrix(clamp_norm(r, limit));
    }
    const Pose3D world = forward_kinematics(body, rotations);
    const double offset_r = config.max_root_offset * std::sqrt(uniform(rng, 0.0, 1.0));
    const double offset_a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec3 offset(offset_r * std::cos(offset_a), 0.0, offset_r * std::sin(offset_a));

    for (int attempt = 0;; ++attempt) {
      const double azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double elevation = uniform(rng, -max_elev, max_elev);
      const double distance = uniform(rng, cams.min_distance, cams.max_distance);
      Camera cam = orbit_camera(azimuth, elevation, distance, cams.focal);
      cam.translation += cam.rotation * offset;
      try {
        PoseSample sample;
        sample.pose2d = project_pinhole(world, cam);
        Pose3D camera_frame = transform(world, cam.rotation, Vec3::Zero());
        sample.pose3d = root_center(camera_frame, skeleton.root_index);
        sample.subject = config.subjects[s];
        sample.action = config.actions[a];
        sample.camera = cam;
        out.push_back(std::move(sample));
        break;
      } catch (const DegenerateError&) {
        if (attempt + 1 >= config.max_retries) throw;
      }
    }
  }
  return out;
}

}  // namespace bodylift
