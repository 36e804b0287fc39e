#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "bodylift/error.hpp"
#include "bodylift/pose.hpp"
#include "bodylift/synth.hpp"
#include "test_support.hpp"

namespace bodylift {
namespace {

Dataset small_synth(std::size_t n, std::uint64_t seed, const Skeleton& sk = Skeleton::h36m16()) {
  Rng rng = make_rng(seed);
  return synth_dataset(sk, n, rng);
}

void expect_same_sample(const PoseSample& a, const PoseSample& b) {
  ASSERT_EQ(a.pose2d.size(), b.pose2d.size());
  for (std::size_t j = 0; j < a.pose2d.size(); ++j) EXPECT_EQ(a.pose2d[j], b.pose2d[j]);
  ASSERT_EQ(a.pose3d.has_value(), b.pose3d.has_value());
  if (a.pose3d) {
    for (std::size_t j = 0; j < a.pose3d->size(); ++j) EXPECT_EQ((*a.pose3d)[j], (*b.pose3d)[j]);
  }
  EXPECT_EQ(a.subject, b.subject);
  EXPECT_EQ(a.action, b.action);
  ASSERT_EQ(a.camera.has_value(), b.camera.has_value());
  if (a.camera) {
    EXPECT_EQ(a.camera->focal, b.camera->focal);
    EXPECT_EQ(a.camera->rotation, b.camera->rotation);
    EXPECT_EQ(a.camera->translation, b.camera->translation);
  }
}

TEST(Dataset, JsonlRoundTripIsExact) {
  testing::TempDir dir("pose");
  Dataset data = small_synth(20, 1);
  data[3].pose3d.reset();
  data[4].camera.reset();
  save_dataset(data, dir / "d.jsonl");
  const Dataset back = load_dataset(dir / "d.jsonl");
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) expect_same_sample(data[i], back[i]);
}

TEST(Dataset, UnlabeledRecordsHaveNo3d) {
  const PoseSample s = parse_json_line(R"({"pose2d":[[1,2],[3,4]]})");
  EXPECT_FALSE(s.labeled());
  EXPECT_EQ(s.joint_count(), 2u);
  EXPECT_TRUE(s.subject.empty());
}

TEST(Dataset, ThreeDimensionalPosesAreRootCenteredOnLoad) {
  const PoseSample s = parse_json_line(R"({"pose2d":[[0,0],[1,1]],"pose3d":[[10,20,30],[11,22,33]]})");
  ASSERT_TRUE(s.labeled());
  EXPECT_EQ((*s.pose3d)[0], Vec3::Zero());
  EXPECT_EQ((*s.pose3d)[1], Vec3(1, 2, 3));
}

TEST(Dataset, ErrorsNameTheLine) {
  testing::TempDir dir("pose");
  std::ofstream(dir / "bad.jsonl") << R"({"pose2d":[[0,0],[1,1]]})" << "\n\n"
                                   << R"({"pose2d":[[0,0],[1]]})" << "\n";
  try {
    load_dataset(dir / "bad.jsonl");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:3"), std::string::npos) << e.what();
  }
}

TEST(Dataset, MalformedRecordsAreRejected) {
  EXPECT_THROW(parse_json_line("not json"), FormatError);
  EXPECT_THROW(parse_json_line("[1,2]"), FormatError);
  EXPECT_THROW(parse_json_line(R"({"pose2d":[]})"), FormatError);
  EXPECT_THROW(parse_json_line(R"({"pose2d":[[0,0]],"pose3d":[[0,0,0],[1,1,1]]})"), FormatError);
  EXPECT_THROW(parse_json_line(R"({"pose2d":[[0,"x"]]})"), FormatError);
  EXPECT_THROW(parse_json_line(R"({"pose2d":[[0,0]],"camera":{"focal":1,"rotation":[1],"translation":[0,0,0]}})"),
               FormatError);
}

TEST(Dataset, MixedJointCountsAreRejected) {
  testing::TempDir dir("pose");
  Dataset data = small_synth(3, 2);
  const Dataset other = small_synth(1, 3, Skeleton::h36m17());
  data.push_back(other[0]);
  save_dataset(data, dir / "mixed.jsonl");
  EXPECT_THROW(load_dataset(dir / "mixed.jsonl"), FormatError);
}

TEST(Dataset, MissingFileIsAFormatError) {
  EXPECT_THROW(load_dataset("/nonexistent/dir/data.jsonl"), FormatError);
}

TEST(RootCenter, PutsRootAtOriginAndKeepsOffsets) {
  Rng rng = make_rng(4);
  Pose3D pose(16);
  for (auto& p : pose) p = Vec3(normal(rng, 0, 500), normal(rng, 0, 500), normal(rng, 4000, 500));
  for (std::size_t root : {0u, 7u}) {
    const Pose3D c = root_center(pose, root);
    EXPECT_EQ(c[root], Vec3::Zero());
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR((c[j] - (pose[j] - pose[root])).norm(), 0.0, 1e-12);
  }
  EXPECT_THROW(root_center(pose, 16), ShapeError);
}

// Normalization -----------------------------------------------------------------

TEST(NormStats, NormalizedTrainingSetHasZeroMeanUnitStd) {
  const Dataset data = small_synth(300, 5);
  const NormStats stats = compute_norm_stats(data);
  const std::size_t j = 16;
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor x2 = batch2d(data, idx, stats);
  const Tensor x3 = batch3d(data, idx, stats);
  auto check = [&](const Tensor& x, std::size_t cols, std::size_t skip_from, std::size_t skip_to) {
    const double n = double(x.rows());
    for (std::size_t c = 0; c < cols; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) mean += x.at(r, c);
      mean /= n;
      for (std::size_t r = 0; r < x.rows(); ++r) sq += (x.at(r, c) - mean) * (x.at(r, c) - mean);
      EXPECT_NEAR(mean, 0.0, 1e-9) << c;
      if (c >= skip_from && c < skip_to) continue;
      EXPECT_NEAR(std::sqrt(sq / n), 1.0, 1e-9) << c;
    }
  };
  check(x2, 2 * j, 0, 0);
  // Root coordinates are constant zero in 3D, their std is clamped instead.
  check(x3, 3 * j, 0, 3);
}

TEST(NormStats, DenormalizeInvertsNormalize) {
  const Dataset data = small_synth(50, 6);
  const NormStats stats = compute_norm_stats(data);
  for (const auto& s : data) {
    const auto n2 = normalize2d(s.pose2d, stats);
    const Pose2D back2 = denormalize2d(n2, stats);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR((back2[j] - s.pose2d[j]).norm(), 0.0, 1e-9);
    const auto n3 = normalize3d(*s.pose3d, stats);
    const Pose3D back3 = denormalize3d(n3, stats);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR((back3[j] - (*s.pose3d)[j]).norm(), 0.0, 1e-9);
  }
}

TEST(NormStats, ConstantCoordinatesAreClampedAndCounted) {
  Dataset data = small_synth(10, 7);
  for (auto& s : data) s.pose2d[3] = Vec2(5.0, 5.0);
  std::size_t clamped = 0;
  const NormStats stats = compute_norm_stats(data, &clamped);
  EXPECT_EQ(stats.std2d[6], NormStats::kMinStd);
  EXPECT_EQ(stats.std2d[7], NormStats::kMinStd);
  EXPECT_GE(clamped, 2u);
  for (const auto& v : normalize2d(data[0].pose2d, stats)) EXPECT_TRUE(std::isfinite(v));
}

TEST(NormStats, UnlabeledSamplesOnlyAffect2d) {
  Dataset data = small_synth(20, 8);
  const NormStats a = compute_norm_stats(data);
  PoseSample extra = data[0];
  extra.pose3d.reset();
  for (auto& p : extra.pose2d) p *= 3.0;
  data.push_back(extra);
  const NormStats b = compute_norm_stats(data);
  EXPECT_EQ(a.mean3d, b.mean3d);
  EXPECT_EQ(a.std3d, b.std3d);
  EXPECT_NE(a.mean2d, b.mean2d);
}

TEST(NormStats, RequiresTwoSamplesAndMatchingWidths) {
  const Dataset data = small_synth(3, 9);
  EXPECT_THROW(compute_norm_stats(Dataset{data[0]}), ConfigError);
  const NormStats stats = compute_norm_stats(data);
  EXPECT_THROW(normalize2d(Pose2D(17), stats), ShapeError);
  EXPECT_THROW(normalize3d(Pose3D(15), stats), ShapeError);
}

TEST(Batching, UnlabeledSampleInA3dBatchIsAnError) {
  Dataset data = small_synth(4, 10);
  const NormStats stats = compute_norm_stats(data);
  data[1].pose3d.reset();
  const std::vector<std::size_t> idx{0, 1};
  EXPECT_NO_THROW(batch2d(data, idx, stats));
  EXPECT_THROW(batch3d(data, idx, stats), FormatError);
}

TEST(CrossActionSplit, PartitionsByAction) {
  const Dataset data = small_synth(200, 11);
  const auto actions = actions_of(data);
  ASSERT_GE(actions.size(), 4u);
  std::set<std::string> train_actions(actions.begin(), std::next(actions.begin(), 4));
  const auto [train, test] = split_cross_action(data, train_actions);
  EXPECT_EQ(train.size() + test.size(), data.size());
  for (const auto& s : train) EXPECT_TRUE(train_actions.count(s.action));
  for (const auto& s : test) EXPECT_FALSE(train_actions.count(s.action));
  EXPECT_THROW(split_cross_action(data, actions), ConfigError);
  EXPECT_THROW(split_cross_action(data, {"NoSuchAction"}), ConfigError);
}

}  // namespace
}  // namespace bodylift
