#include "bodylift/skeleton.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "bodylift/error.hpp"

namespace bodylift {

namespace {

struct JointDef {
  const char* name;
  int parent;
  double length;
  Vec3 direction;
};

const Vec3 kUp{0.0, 1.0, 0.0};
const Vec3 kDown{0.0, -1.0, 0.0};
const Vec3 kLeft{1.0, 0.0, 0.0};
const Vec3 kRight{-1.0, 0.0, 0.0};

Skeleton from_defs(const std::vector<JointDef>& defs) {
  Skeleton s;
  for (const auto& d : defs) {
    s.joint_names.emplace_back(d.name);
    s.parents.push_back(d.parent);
    s.bone_lengths.push_back(d.length);
    s.rest_directions.push_back(d.direction);
  }
  s.root_index = 0;
  s.validate();
  return s;
}

// Rest directions for the standard joint names; used when a skeleton file
// omits them.
Vec3 default_direction(const std::string& name) {
  static const std::vector<std::pair<std::string, Vec3>> table = {
      {"RHip", kRight},      {"LHip", kLeft},      {"RShoulder", kRight}, {"LShoulder", kLeft},
      {"RKnee", kDown},      {"RFoot", kDown},     {"LKnee", kDown},      {"LFoot", kDown},
      {"RElbow", kDown},     {"RWrist", kDown},    {"LElbow", kDown},     {"LWrist", kDown},
      {"Spine", kUp},        {"Thorax", kUp},      {"Neck/Nose", kUp},    {"Head", kUp}};
  for (const auto& [n, d] : table) {
    if (n == name) return d;
  }
  return kDown;
}

}  // namespace

JointSet Skeleton::joint_set() const noexcept {
  if (joint_names == h36m16().joint_names) return JointSet::H36M16;
  if (joint_names == h36m17().joint_names) return JointSet::H36M17;
  return JointSet::Custom;
}

void Skeleton::validate() const {
  const std::size_t j = joint_names.size();
  if (j < 2) throw FormatError("skeleton needs at least 2 joints");
  if (parents.size() != j || bone_lengths.size() != j || rest_directions.size() != j) {
    throw FormatError("skeleton arrays disagree on joint count");
  }
  if (root_index >= j) throw FormatError("skeleton root_index out of range");
  if (parents[root_index] != kNoParent) throw FormatError("skeleton root must have parent -1");
  for (std::size_t i = 0; i < j; ++i) {
    if (i == root_index) continue;
    if (parents[i] < 0 || std::size_t(parents[i]) >= j || std::size_t(parents[i]) == i) {
      throw FormatError("skeleton joint '" + joint_names[i] + "' has an invalid parent");
    }
    if (!(bone_lengths[i] > 0.0)) {
      throw FormatError("skeleton joint '" + joint_names[i] + "' has a non-positive bone length");
    }
    if (std::abs(rest_directions[i].norm() - 1.0) > 1e-9) {
      throw FormatError("skeleton joint '" + joint_names[i] + "' has a non-unit rest direction");
    }
  }
  // Every joint must reach the root without revisiting a joint.
  for (std::size_t i = 0; i < j; ++i) {
    std::size_t cur = i, hops = 0;
    while (cur != root_index) {
      if (parents[cur] < 0 || ++hops > j) throw FormatError("skeleton parents do not form a tree");
      cur = std::size_t(parents[cur]);
    }
  }
}

std::vector<std::size_t> Skeleton::topological_order() const {
  const std::size_t j = joint_count();
  std::vector<std::size_t> order{root_index};
  std::vector<bool> placed(j, false);
  placed[root_index] = true;
  while (order.size() < j) {
    const std::size_t before = order.size();
    for (std::size_t i = 0; i < j; ++i) {
      if (!placed[i] && parents[i] >= 0 && placed[std::size_t(parents[i])]) {
        order.push_back(i);
        placed[i] = true;
      }
    }
    if (order.size() == before) throw FormatError("skeleton parents do not form a tree");
  }
  return order;
}

Skeleton Skeleton::h36m16() {
  return from_defs({{"Hip", kNoParent, 0.0, kUp},
                    {"RHip", 0, 132.9, kRight},
                    {"RKnee", 1, 442.9, kDown},
                    {"RFoot", 2, 454.2, kDown},
                    {"LHip", 0, 132.9, kLeft},
                    {"LKnee", 4, 442.9, kDown},
                    {"LFoot", 5, 454.2, kDown},
                    {"Spine", 0, 233.4, kUp},
                    {"Thorax", 7, 257.1, kUp},
                    {"Head", 8, 236.0, kUp},
                    {"LShoulder", 8, 151.0, kLeft},
                    {"LElbow", 10, 278.9, kDown},
                    {"LWrist", 11, 251.7, kDown},
                    {"RShoulder", 8, 151.0, kRight},
                    {"RElbow", 13, 278.9, kDown},
                    {"RWrist", 14, 251.7, kDown}});
}

Skeleton Skeleton::h36m17() {
  return from_defs({{"Hip", kNoParent, 0.0, kUp},
                    {"RHip", 0, 132.9, kRight},
                    {"RKnee", 1, 442.9, kDown},
                    {"RFoot", 2, 454.2, kDown},
                    {"LHip", 0, 132.9, kLeft},
                    {"LKnee", 4, 442.9, kDown},
                    {"LFoot", 5, 454.2, kDown},
                    {"Spine", 0, 233.4, kUp},
                    {"Thorax", 7, 257.1, kUp},
                    {"Neck/Nose", 8, 121.4, kUp},
                    {"Head", 9, 115.0, kUp},
                    {"LShoulder", 8, 151.0, kLeft},
                    {"LElbow", 11, 278.9, kDown},
                    {"LWrist", 12, 251.7, kDown},
                    {"RShoulder", 8, 151.0, kRight},
                    {"RElbow", 14, 278.9, kDown},
                    {"RWrist", 15, 251.7, kDown}});
}

Skeleton Skeleton::preset(JointSet set) {
  switch (set) {
    case JointSet::H36M16: return h36m16();
    case JointSet::H36M17: return h36m17();
    case JointSet::Custom: break;
  }
  throw ConfigError("no preset skeleton for a custom joint set");
}

Skeleton load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open skeleton file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    Skeleton s;
    s.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    s.parents = j.at("parents").get<std::vector<int>>();
    s.bone_lengths = j.at("bone_lengths").get<std::vector<double>>();
    s.root_index = j.at("root_index").get<std::size_t>();
    if (j.contains("rest_directions")) {
      for (const auto& d : j.at("rest_directions")) {
        const auto v = d.get<std::vector<double>>();
        if (v.size() != 3) throw FormatError("rest direction must have 3 components");
        s.rest_directions.push_back(Vec3(v[0], v[1], v[2]).normalized());
      }
    } else {
      for (const auto& name : s.joint_names) s.rest_directions.push_back(default_direction(name));
    }
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("skeleton file " + path.string() + ": " + e.what());
  }
}

void save_skeleton(const Skeleton& skeleton, const std::filesystem::path& path) {
  nlohmann::json j;
  j["joint_names"] = skeleton.joint_names;
  j["parents"] = skeleton.parents;
  j["bone_lengths"] = skeleton.bone_lengths;
  j["root_index"] = skeleton.root_index;
  auto dirs = nlohmann::json::array();
  for (const auto& d : skeleton.rest_directions) dirs.push_back({d.x(), d.y(), d.z()});
  j["rest_directions"] = dirs;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write skeleton file " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace bodylift
