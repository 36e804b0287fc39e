#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "bodylift/geometry.hpp"

namespace bodylift {

/// Identifies the joint layout; stored in checkpoints so data and model can be matched.
enum class JointSet : std::uint32_t { Custom = 0, H36M16 = 16, H36M17 = 17 };

struct Skeleton {
  static constexpr int kNoParent = -1;

  std::vector<std::string> joint_names;
  std::vector<int> parents;
  std::vector<double> bone_lengths;  // mm; entry for the root is ignored
  std::size_t root_index = 0;
  // Unit direction of each bone in the rest pose, expressed in the parent frame.
  std::vector<Vec3> rest_directions;

  std::size_t joint_count() const noexcept { return joint_names.size(); }
  JointSet joint_set() const noexcept;

  /// Throws FormatError unless parents form a tree rooted at root_index,
  /// every non-root bone is positive and every array has J entries.
  void validate() const;

  /// Joints ordered so that every parent precedes its children.
  std::vector<std::size_t> topological_order() const;

  static Skeleton h36m16();
  static Skeleton h36m17();
  static Skeleton preset(JointSet set);
};

Skeleton load_skeleton(const std::filesystem::path& path);
void save_skeleton(const Skeleton& skeleton, const std::filesystem::path& path);

}  // namespace bodylift
