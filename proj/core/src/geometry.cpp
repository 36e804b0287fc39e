#include "bodylift/geometry.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace bodylift {

Mat3 axis_angle_to_matrix(const Vec3& v) {
  const double angle = v.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, v / angle).toRotationMatrix();
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && r.determinant() > 0.0;
}

Pose3D transform(const Pose3D& pose, const Mat3& rotation, const Vec3& translation, double scale) {
  Pose3D out;
  out.reserve(pose.size());
  for (const auto& p : pose) out.push_back(scale * (rotation * p) + translation);
  return out;
}

}  // namespace bodylift
