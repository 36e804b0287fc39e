#include "bodylift/pose.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "bodylift/error.hpp"

namespace bodylift {

using nlohmann::json;

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw FormatError(std::string(what) + " contains a non-finite coordinate");
}

Pose2D parse_pose2d(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw FormatError("pose2d must be a non-empty array");
  Pose2D pose;
  pose.reserve(arr.size());
  for (const auto& joint : arr) {
    if (!joint.is_array() || joint.size() != 2) throw FormatError("pose2d joints must have 2 coordinates");
    Vec2 p(joint[0].get<double>(), joint[1].get<double>());
    require_finite(p.x(), "pose2d");
    require_finite(p.y(), "pose2d");
    pose.push_back(p);
  }
  return pose;
}

Pose3D parse_pose3d(const json& arr) {
  if (!arr.is_array() || arr.empty()) throw FormatError("pose3d must be a non-empty array");
  Pose3D pose;
  pose.reserve(arr.size());
  for (const auto& joint : arr) {
    if (!joint.is_array() || joint.size() != 3) throw FormatError("pose3d joints must have 3 coordinates");
    Vec3 p(joint[0].get<double>(), joint[1].get<double>(), joint[2].get<double>());
    for (int k = 0; k < 3; ++k) require_finite(p[k], "pose3d");
    pose.push_back(p);
  }
  return pose;
}

Camera parse_camera(const json& j) {
  Camera cam;
  cam.focal = j.at("focal").get<double>();
  const auto r = j.at("rotation").get<std::vector<double>>();
  const auto t = j.at("translation").get<std::vector<double>>();
  if (r.size() != 9) throw FormatError("camera rotation must have 9 numbers");
  if (t.size() != 3) throw FormatError("camera translation must have 3 numbers");
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) cam.rotation(row, col) = r[std::size_t(row * 3 + col)];
  }
  cam.translation = Vec3(t[0], t[1], t[2]);
  return cam;
}

}  // namespace

PoseSample parse_json_line(const std::string& line, std::size_t root_index) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("record must be a JSON object");
  try {
    PoseSample s;
    s.subject = j.value("subject", std::string{});
    s.action = j.value("action", std::string{});
    s.pose2d = parse_pose2d(j.at("pose2d"));
    if (j.contains("pose3d") && !j.at("pose3d").is_null()) {
      Pose3D p3 = parse_pose3d(j.at("pose3d"));
      if (p3.size() != s.pose2d.size()) throw FormatError("pose3d and pose2d joint counts differ");
      if (root_index >= p3.size()) throw FormatError("root index outside the pose");
      s.pose3d = root_center(p3, root_index);
    }
    if (j.contains("camera") && !j.at("camera").is_null()) s.camera = parse_camera(j.at("camera"));
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad record: ") + e.what());
  }
}

std::string to_json_line(const PoseSample& sample) {
  json j;
  j["subject"] = sample.subject;
  j["action"] = sample.action;
  auto p2 = json::array();
  for (const auto& p : sample.pose2d) p2.push_back({p.x(), p.y()});
  j["pose2d"] = std::move(p2);
  if (sample.pose3d) {
    auto p3 = json::array();
    for (const auto& p : *sample.pose3d) p3.push_back({p.x(), p.y(), p.z()});
    j["pose3d"] = std::move(p3);
  }
  if (sample.camera) {
    const auto& c = *sample.camera;
    std::vector<double> r;
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) r.push_back(c.rotation(row, col));
    }
    j["camera"] = {{"focal", c.focal},
                   {"rotation", r},
                   {"translation", {c.translation.x(), c.translation.y(), c.translation.z()}}};
  }
  return j.dump();
}

Dataset load_dataset(const std::filesystem::path& path, std::size_t root_index) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      PoseSample s = parse_json_line(line, root_index);
      if (!out.empty() && s.joint_count() != out.front().joint_count()) {
        throw FormatError("record has " + std::to_string(s.joint_count()) + " joints, expected " +
                          std::to_string(out.front().joint_count()));
      }
      out.push_back(std::move(s));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void save_dataset(const Dataset& samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write dataset " + path.string());
  for (const auto& s : samples) out << to_json_line(s) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

Pose3D root_center(const Pose3D& pose, std::size_t root_index) {
  if (root_index >= pose.size()) throw ShapeError("root index outside the pose");
  const Vec3 root = pose[root_index];
  Pose3D out;
  out.reserve(pose.size());
  for (const auto& p : pose) out.push_back(p - root);
  return out;
}

std::vector<double> flatten(const Pose2D& pose) {
  std::vector<double> v;
  v.reserve(pose.size() * 2);
  for (const auto& p : pose) {
    v.push_back(p.x());
    v.push_back(p.y());
  }
  return v;
}

std::vector<double> flatten(const Pose3D& pose) {
  std::vector<double> v;
  v.reserve(pose.size() * 3);
  for (const auto& p : pose) {
    v.push_back(p.x());
    v.push_back(p.y());
    v.push_back(p.z());
  }
  return v;
}

Pose3D unflatten3d(std::span<const double> values) {
  if (values.size() % 3 != 0) throw ShapeError("3D pose vector length must be a multiple of 3");
  Pose3D pose;
  pose.reserve(values.size() / 3);
  for (std::size_t i = 0; i < values.size(); i += 3) pose.emplace_back(values[i], values[i + 1], values[i + 2]);
  return pose;
}

namespace {

void mean_std(const std::vector<std::vector<double>>& rows, std::vector<double>& mean, std::vector<double>& stdev,
              std::size_t& clamped) {
  const std::size_t dim = rows.front().size();
  mean.assign(dim, 0.0);
  stdev.assign(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) mean[i] += r[i];
  }
  for (auto& m : mean) m /= double(rows.size());
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = r[i] - mean[i];
      stdev[i] += d * d;
    }
  }
  for (auto& s : stdev) {
    s = std::sqrt(s / double(rows.size()));
    if (!(s > NormStats::kMinStd)) {
      s = NormStats::kMinStd;
      ++clamped;
    }
  }
}

}  // namespace

NormStats compute_norm_stats(const Dataset& samples, std::size_t* clamped) {
  if (samples.size() < 2) throw ConfigError("normalization statistics need at least 2 samples");
  std::vector<std::vector<double>> rows2d, rows3d;
  const std::size_t j = samples.front().joint_count();
  for (const auto& s : samples) {
    if (s.joint_count() != j) throw ShapeError("samples disagree on joint count");
    rows2d.push_back(flatten(s.pose2d));
    if (s.pose3d) rows3d.push_back(flatten(*s.pose3d));
  }
  if (rows3d.size() < 2) throw ConfigError("normalization statistics need at least 2 samples with 3D poses");
  NormStats stats;
  std::size_t n_clamped = 0;
  mean_std(rows2d, stats.mean2d, stats.std2d, n_clamped);
  mean_std(rows3d, stats.mean3d, stats.std3d, n_clamped);
  if (clamped) *clamped = n_clamped;
  return stats;
}

std::vector<double> normalize2d(const Pose2D& pose, const NormStats& stats) {
  auto v = flatten(pose);
  if (v.size() != stats.mean2d.size()) throw ShapeError("2D pose width does not match normalization statistics");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - stats.mean2d[i]) / stats.std2d[i];
  return v;
}

std::vector<double> normalize3d(const Pose3D& pose, const NormStats& stats) {
  auto v = flatten(pose);
  if (v.size() != stats.mean3d.size()) throw ShapeError("3D pose width does not match normalization statistics");
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - stats.mean3d[i]) / stats.std3d[i];
  return v;
}

NormalizedSample normalize(const PoseSample& sample, const NormStats& stats) {
  NormalizedSample out;
  out.pose2d = normalize2d(sample.pose2d, stats);
  if (sample.pose3d) out.pose3d = normalize3d(*sample.pose3d, stats);
  return out;
}

Pose2D denormalize2d(std::span<const double> values, const NormStats& stats) {
  if (values.size() != stats.mean2d.size()) throw ShapeError("2D vector width does not match normalization statistics");
  Pose2D pose;
  for (std::size_t i = 0; i < values.size(); i += 2) {
    pose.emplace_back(values[i] * stats.std2d[i] + stats.mean2d[i],
                      values[i + 1] * stats.std2d[i + 1] + stats.mean2d[i + 1]);
  }
  return pose;
}

Pose3D denormalize3d(std::span<const double> values, const NormStats& stats) {
  if (values.size() != stats.mean3d.size()) throw ShapeError("3D vector width does not match normalization statistics");
  std::vector<double> mm(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mm[i] = values[i] * stats.std3d[i] + stats.mean3d[i];
  return unflatten3d(mm);
}

Tensor batch2d(const Dataset& samples, std::span<const std::size_t> indices, const NormStats& stats) {
  const std::size_t width = stats.mean2d.size();
  Tensor out({indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto v = normalize2d(samples.at(indices[r]).pose2d, stats);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

Tensor batch3d(const Dataset& samples, std::span<const std::size_t> indices, const NormStats& stats) {
  const std::size_t width = stats.mean3d.size();
  Tensor out({indices.size(), width});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& s = samples.at(indices[r]);
    if (!s.pose3d) throw FormatError("sample without 3D pose in a labeled batch");
    const auto v = normalize3d(*s.pose3d, stats);
    std::copy(v.begin(), v.end(), out.row(r).begin());
  }
  return out;
}

std::set<std::string> actions_of(const Dataset& samples) {
  std::set<std::string> out;
  for (const auto& s : samples) out.insert(s.action);
  return out;
}

std::pair<Dataset, Dataset> split_cross_action(const Dataset& samples, const std::set<std::string>& train_actions) {
  Dataset train, test;
  for (const auto& s : samples) {
    if (s.action.empty()) throw FormatError("cross-action split needs action tags on every sample");
    (train_actions.count(s.action) ? train : test).push_back(s);
  }
  if (train.empty() || test.empty()) {
    std::string available;
    for (const auto& a : actions_of(samples)) available += (available.empty() ? "" : ", ") + a;
    throw ConfigError(std::string("cross-action split leaves the ") + (train.empty() ? "train" : "test") +
                      " side empty; available actions: " + available);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace bodylift
