#include "bodylift/verify/oracles.hpp"

#include <cmath>

namespace bodylift::verify {

namespace {

double dist(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double brute_mpjpe_p1(const Pose3D& pred, const Pose3D& gt, std::size_t root_index) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Vec3 p, g;
    for (int k = 0; k < 3; ++k) {
      p[k] = pred[i][k] - pred[root_index][k];
      g[k] = gt[i][k] - gt[root_index][k];
    }
    total += dist(p, g);
  }
  return total / double(pred.size());
}

std::array<double, 4> jacobi_eigen4(std::array<std::array<double, 4>, 4> a,
                                    std::array<std::array<double, 4>, 4>& v) {
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) v[i][j] = i == j ? 1.0 : 0.0;
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-300) break;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 4; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  return {a[0][0], a[1][1], a[2][2], a[3][3]};
}

ReferenceSimilarity horn_similarity(const Pose3D& pred, const Pose3D& gt) {
  const std::size_t n = pred.size();
  double mp[3] = {0, 0, 0}, mg[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      mp[k] += pred[i][k] / double(n);
      mg[k] += gt[i][k] / double(n);
    }
  }
  // S[a][b] = Σ p_a · g_b over centered points.
  double s[3][3] = {};
  double pp = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p[3], g[3];
    for (int k = 0; k < 3; ++k) {
      p[k] = pred[i][k] - mp[k];
      g[k] = gt[i][k] - mg[k];
      pp += p[k] * p[k];
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) s[a][b] += p[a] * g[b];
    }
  }
  const double sxx = s[0][0], sxy = s[0][1], sxz = s[0][2];
  const double syx = s[1][0], syy = s[1][1], syz = s[1][2];
  const double szx = s[2][0], szy = s[2][1], szz = s[2][2];
  std::array<std::array<double, 4>, 4> nmat = {{
      {sxx + syy + szz, syz - szy, szx - sxz, sxy - syx},
      {syz - szy, sxx - syy - szz, sxy + syx, szx + sxz},
      {szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy},
      {sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz},
  }};
  std::array<std::array<double, 4>, 4> vecs;
  const auto vals = jacobi_eigen4(nmat, vecs);
  int best = 0;
  for (int k = 1; k < 4; ++k) {
    if (vals[k] > vals[best]) best = k;
  }
  const double q0 = vecs[0][best], qx = vecs[1][best], qy = vecs[2][best], qz = vecs[3][best];

  ReferenceSimilarity out;
  auto& r = out.rotation;
  r[0] = {q0 * q0 + qx * qx - qy * qy - qz * qz, 2 * (qx * qy - q0 * qz), 2 * (qx * qz + q0 * qy)};
  r[1] = {2 * (qy * qx + q0 * qz), q0 * q0 - qx * qx + qy * qy - qz * qz, 2 * (qy * qz - q0 * qx)};
  r[2] = {2 * (qz * qx - q0 * qy), 2 * (qz * qy + q0 * qx), q0 * q0 - qx * qx - qy * qy + qz * qz};

  // Least-squares scale for fixed rotation: Σ g·(R p) / Σ |p|².
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double p[3], g[3];
    for (int k = 0; k < 3; ++k) {
      p[k] = pred[i][k] - mp[k];
      g[k] = gt[i][k] - mg[k];
    }
    for (int a = 0; a < 3; ++a) {
      const double rp = r[a][0] * p[0] + r[a][1] * p[1] + r[a][2] * p[2];
      num += g[a] * rp;
    }
  }
  out.scale = num / pp;
  for (int a = 0; a < 3; ++a) {
    const double rmp = r[a][0] * mp[0] + r[a][1] * mp[1] + r[a][2] * mp[2];
    out.translation[a] = mg[a] - out.scale * rmp;
  }
  return out;
}

double brute_mpjpe_p2(const Pose3D& pred, const Pose3D& gt) {
  const auto t = horn_similarity(pred, gt);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    Vec3 aligned;
    for (int a = 0; a < 3; ++a) {
      aligned[a] = t.scale * (t.rotation[a][0] * pred[i][0] + t.rotation[a][1] * pred[i][1] +
                              t.rotation[a][2] * pred[i][2]) +
                   t.translation[a];
    }
    total += dist(aligned, gt[i]);
  }
  return total / double(pred.size());
}

double brute_pck(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts, double threshold,
                 std::size_t root_index) {
  double hits = 0.0, total = 0.0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    for (std::size_t i = 0; i < preds[k].size(); ++i) {
      Vec3 p, g;
      for (int c = 0; c < 3; ++c) {
        p[c] = preds[k][i][c] - preds[k][root_index][c];
        g[c] = gts[k][i][c] - gts[k][root_index][c];
      }
      if (dist(p, g) < threshold) hits += 1.0;
      total += 1.0;
    }
  }
  return hits / total;
}

double brute_auc(const std::vector<Pose3D>& preds, const std::vector<Pose3D>& gts,
                 const std::vector<double>& thresholds, std::size_t root_index) {
  double sum = 0.0;
  for (double t : thresholds) sum += brute_pck(preds, gts, t, root_index);
  return sum / double(thresholds.size());
}

Pose3D random_pose(Rng& rng, std::size_t joints, double spread_mm) {
  Pose3D p(joints);
  for (auto& j : p) j = Vec3(normal(rng, 0, spread_mm), normal(rng, 0, spread_mm), normal(rng, 0, spread_mm));
  return p;
}

Mat3 random_rotation(Rng& rng) {
  // Uniform quaternion.
  double q[4];
  double norm = 0.0;
  for (double& c : q) {
    c = normal(rng);
    norm += c * c;
  }
  norm = std::sqrt(norm);
  for (double& c : q) c /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

}  // namespace bodylift::verify
