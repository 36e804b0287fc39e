#include "bodylift/metrics.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "bodylift/error.hpp"

namespace bodylift::metrics {

namespace {

void require_same_joints(const Pose3D& a, const Pose3D& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("pose joint counts differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

Eigen::Matrix3Xd centered(const Pose3D& pose, Vec3& mean) {
  Eigen::Matrix3Xd m(3, pose.size());
  mean.setZero();
  for (std::size_t i = 0; i < pose.size(); ++i) mean += pose[i];
  mean /= double(pose.size());
  for (std::size_t i = 0; i < pose.size(); ++i) m.col(Eigen::Index(i)) = pose[i] - mean;
  return m;
}

void require_spread(const Eigen::Matrix3Xd& m, const char* which) {
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(m * m.transpose());
  const auto s = svd.singularValues();
  if (!(s[0] > 1e-18) || !(s[1] > 1e-12 * s[0])) {
    throw DegenerateError(std::string("procrustes: ") + which + " joints are coincident or collinear");
  }
}

}  // namespace

double mpjpe(const Pose3D& pred, const Pose3D& gt) {
  require_same_joints(pred, gt);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += (pred[i] - gt[i]).norm();
  return total / double(pred.size());
}

std::vector<double> joint_errors_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index) {
  require_same_joints(pred, gt);
  if (root_index >= pred.size()) throw ShapeError("root index outside the pose");
  const Vec3 offset = gt[root_index] - pred[root_index];
  std::vector<double> errors(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) errors[i] = (pred[i] + offset - gt[i]).norm();
  return errors;
}

double mpjpe_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index) {
  const auto e = joint_errors_p1(pred, gt, root_index);
  return std::accumulate(e.begin(), e.end(), 0.0) / double(e.size());
}

SimilarityTransform procrustes_align(const Pose3D& pred, const Pose3D& gt) {
  require_same_joints(pred, gt);
  if (pred.size() < 3) throw DegenerateError("procrustes: need at least 3 joints");
  Vec3 mu_p, mu_g;
  const auto p = centered(pred, mu_p);
  const auto g = centered(gt, mu_g);
  require_spread(p, "predicted");
  require_spread(g, "ground-truth");

  // Cross-covariance H = P·Gᵀ; the rotation maximizing tr(R·H) is V·D·Uᵀ.
  const Mat3 h = p * g.transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 d(1.0, 1.0, (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0);

  SimilarityTransform t;
  t.rotation = v * d.asDiagonal() * u.transpose();
  t.scale = d.dot(svd.singularValues()) / p.squaredNorm();
  t.translation = mu_g - t.scale * t.rotation * mu_p;
  return t;
}

double mpjpe_p2(const Pose3D& pred, const Pose3D& gt) { return mpjpe(procrustes_align(pred, gt).apply(pred), gt); }

double pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold_mm,
           std::size_t root_index) {
  if (preds.size() != gts.size()) throw ShapeError("pck: prediction and ground-truth counts differ");
  std::size_t hit = 0, total = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    for (double e : joint_errors_p1(preds[k], gts[k], root_index)) {
      hit += e < threshold_mm ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw ShapeError("pck: no joints to score");
  return double(hit) / double(total);
}

double auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, const std::vector<double>& thresholds,
           std::size_t root_index) {
  if (thresholds.empty()) throw ConfigError("auc: empty threshold grid");
  if (preds.size() != gts.size()) throw ShapeError("auc: prediction and ground-truth counts differ");
  // One pass over the errors, then count per threshold.
  std::vector<double> errors;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    const auto e = joint_errors_p1(preds[k], gts[k], root_index);
    errors.insert(errors.end(), e.begin(), e.end());
  }
  if (errors.empty()) throw ShapeError("auc: no joints to score");
  double sum = 0.0;
  for (double t : thresholds) {
    const auto hit = std::count_if(errors.begin(), errors.end(), [t](double e) { return e < t; });
    sum += double(hit) / double(errors.size());
  }
  return sum / double(thresholds.size());
}

std::vector<double> default_auc_grid() {
  std::vector<double> grid;
  for (int t = 0; t <= 150; t += 5) grid.push_back(double(t));
  return grid;
}

std::vector<Pose3D> predict_poses(const Predictor& predictor, const Dataset& data, const NormStats& stats,
                                  std::size_t root_index, std::size_t batch_size) {
  std::vector<Pose3D> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor pred = predictor(batch2d(data, idx, stats));
    if (pred.rank() != 2 || pred.rows() != idx.size() || pred.cols() != stats.mean3d.size()) {
      throw ShapeError("predictor returned " + to_string(pred.shape()));
    }
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.push_back(root_center(denormalize3d(pred.row(r), stats), root_index));
    }
  }
  return out;
}

EvalReport evaluate(const Predictor& predictor, const Dataset& data, const NormStats& stats,
                    const EvalOptions& options) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  for (const auto& s : data) {
    if (!s.pose3d) throw FormatError("evaluate: dataset contains samples without 3D labels");
  }
  const auto preds = predict_poses(predictor, data, stats, options.root_index, options.batch_size);
  std::vector<Pose3D> gts;
  gts.reserve(data.size());
  for (const auto& s : data) gts.push_back(root_center(*s.pose3d, options.root_index));

  EvalReport report;
  report.n_samples = data.size();
  report.pck_threshold = options.pck_threshold;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double p1 = mpjpe_p1(preds[k], gts[k], options.root_index);
    const double p2 = mpjpe_p2(preds[k], gts[k]);
    report.mpjpe_p1 += p1;
    report.mpjpe_p2 += p2;
    auto& a = report.per_action[data[k].action];
    a.mpjpe_p1 += p1;
    a.mpjpe_p2 += p2;
    ++a.count;
  }
  report.mpjpe_p1 /= double(data.size());
  report.mpjpe_p2 /= double(data.size());
  for (auto& [name, a] : report.per_action) {
    a.mpjpe_p1 /= double(a.count);
    a.mpjpe_p2 /= double(a.count);
  }
  report.pck = pck(preds, gts, options.pck_threshold, options.root_index);
  report.auc = auc(preds, gts, options.auc_thresholds, options.root_index);
  return report;
}

std::string report_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json j;
  j["n_samples"] = report.n_samples;
  j["mpjpe_p1_mm"] = report.mpjpe_p1;
  j["mpjpe_p2_mm"] = report.mpjpe_p2;
  j["pck"] = report.pck;
  j["pck_threshold_mm"] = report.pck_threshold;
  j["auc"] = report.auc;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& [name, a] : report.per_action) {
    rows.push_back({{"action", name}, {"count", a.count}, {"mpjpe_p1_mm", a.mpjpe_p1}, {"mpjpe_p2_mm", a.mpjpe_p2}});
  }
  j["per_action"] = rows;
  return j.dump(indent);
}

std::string report_table(const EvalReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %12s %12s\n", "action", "count", "P1 (mm)", "P2 (mm)");
  os << line;
  for (const auto& [name, a] : report.per_action) {
    std::snprintf(line, sizeof line, "%-20s %8zu %12.2f %12.2f\n", name.c_str(), a.count, a.mpjpe_p1, a.mpjpe_p2);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-20s %8zu %12.2f %12.2f\n", "ALL", report.n_samples, report.mpjpe_p1,
                report.mpjpe_p2);
  os << line;
  std::snprintf(line, sizeof line, "PCK@%.0fmm %.4f   AUC %.4f\n", report.pck_threshold, report.pck, report.auc);
  os << line;
  return os.str();
}

}  // namespace bodylift::metrics
