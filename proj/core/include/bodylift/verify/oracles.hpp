#pragma once

#include <array>
#include <vector>

#include "bodylift/geometry.hpp"
#include "bodylift/random.hpp"

// Reference implementations kept deliberately separate from the library's
// code paths: plain loops, a quaternion (Horn) solution to absolute
// orientation instead of SVD, and sorting-free counting for PCK/AUC.
namespace bodylift::verify {

double brute_mpjpe_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index);

struct ReferenceSimilarity {
  std::array<std::array<double, 3>, 3> rotation;
  double scale;
  std::array<double, 3> translation;
};

/// Horn's closed-form quaternion solution; rotation from the dominant
/// eigenvector of the 4×4 symmetric matrix (cyclic Jacobi), scale by least squares.
ReferenceSimilarity horn_similarity(const Pose3D& pred, const Pose3D& gt);
double brute_mpjpe_p2(const Pose3D& pred, const Pose3D& gt);

double brute_pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold,
                 std::size_t root_index);
double brute_auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
                 const std::vector<double>& thresholds, std::size_t root_index);

/// Eigen-decomposition of a symmetric 4×4 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues; columns of `vectors` are the eigenvectors.
std::array<double, 4> jacobi_eigen4(std::array<std::array<double, 4>, 4> a,
                                    std::array<std::array<double, 4>, 4>& vectors);

Pose3D random_pose(Rng& rng, std::size_t joints, double spread_mm = 300.0);
Mat3 random_rotation(Rng& rng);

}  // namespace bodylift::verify
