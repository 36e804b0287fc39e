#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <vector>

namespace bodylift {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Pose2D = std::vector<Vec2>;
using Pose3D = std::vector<Vec3>;

/// Rotation by |v| radians about v/|v| (Rodrigues). Zero vector gives identity.
Mat3 axis_angle_to_matrix(const Vec3& v);

/// RᵀR = I within `tol` and det R > 0.
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Applies R·p + t to every joint.
Pose3D transform(const Pose3D& pose, const Mat3& rotation, const Vec3& translation, double scale = 1.0);

}  // namespace bodylift
