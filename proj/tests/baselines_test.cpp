#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "poseuq/baselines.hpp"
#include "poseuq/errors.hpp"
#include "test_support.hpp"

namespace poseuq {
namespace {

const PointCloud& cuboid10() {
  static const PointCloud c = make_cuboid_keypoints(Vec3::Constant(0.1), "cube10");
  return c;
}

struct Frame {
  Pose truth;
  KeypointSet keypoints;
  DetectionMeta meta;
};

Frame noisy_frame(Rng& rng, double sigma) {
  const CameraIntrinsics k;
  Frame f{Pose(testing::random_quat(rng), Vec3(0.0, 0.0, 0.8)), {}, {}};
  f.keypoints = project(f.truth, cuboid10(), k);
  for (auto& p : f.keypoints.points) p += Vec2(rng.normal(0.0, sigma), rng.normal(0.0, sigma));
  f.meta.reported_confidence = 0.7;
  f.meta.keypoint_sigma.assign(f.keypoints.size(), sigma);
  return f;
}

// Pass one draws every perturbation up front, pass two solves and reduces.
// Shares only the documented draw order with the library.
double guapo_oracle(const Frame& f, int samples, std::uint64_t seed, bool rms) {
  const CameraIntrinsics k;
  Rng rng(seed);
  std::vector<KeypointSet> sets;
  for (int s = 0; s < samples; ++s) {
    KeypointSet kp = f.keypoints;
    for (std::size_t i = 0; i < kp.size(); ++i) {
      if (!kp.visible[i]) continue;
      const double du = rng.normal(0.0, f.meta.keypoint_sigma[i]);
      const double dv = rng.normal(0.0, f.meta.keypoint_sigma[i]);
      kp.points[i] += Vec2(du, dv);
    }
    sets.push_back(kp);
  }
  const Pose center = solve_pnp(cuboid10(), f.keypoints, k);
  std::vector<Pose> poses;
  for (const auto& kp : sets) poses.push_back(solve_pnp(cuboid10(), kp, k));

  if (rms) {
    double sq = 0.0;
    for (const auto& p : poses) sq += std::pow(add_distance(p, center, cuboid10()), 2);
    return std::sqrt(sq / static_cast<double>(poses.size()));
  }
  std::vector<double> norms;
  for (const auto& p : poses) norms.push_back(p.translation().norm());
  const double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / norms.size();
  double var = 0.0;
  for (double v : norms) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(norms.size() - 1));
}

TEST(ConfidenceUq, Examples) {
  DetectionMeta m;
  m.reported_confidence = 1.0;
  EXPECT_EQ(confidence_uq(m), 0.0);
  m.reported_confidence = 0.25;
  EXPECT_EQ(confidence_uq(m), 0.75);
  m.reported_confidence = 1.5;
  EXPECT_THROW(confidence_uq(m), ValidationError);
}

TEST(ConfidenceUq, RankingIsDescendingConfidence) {
  Rng rng(60);
  std::vector<double> conf(100);
  for (auto& c : conf) c = rng.uniform();
  std::vector<std::size_t> by_uq(conf.size());
  std::iota(by_uq.begin(), by_uq.end(), std::size_t{0});
  auto by_conf = by_uq;
  std::sort(by_uq.begin(), by_uq.end(), [&](std::size_t a, std::size_t b) {
    DetectionMeta ma;
    DetectionMeta mb;
    ma.reported_confidence = conf[a];
    mb.reported_confidence = conf[b];
    return confidence_uq(ma) < confidence_uq(mb);
  });
  std::sort(by_conf.begin(), by_conf.end(),
            [&](std::size_t a, std::size_t b) { return conf[a] > conf[b]; });
  EXPECT_EQ(by_uq, by_conf);
}

TEST(ConfidenceUq, StrictlyDecreasing) {
  DetectionMeta a;
  DetectionMeta b;
  for (int i = 0; i < 100; ++i) {
    a.reported_confidence = i / 100.0;
    b.reported_confidence = (i + 1) / 100.0;
    EXPECT_GT(confidence_uq(a), confidence_uq(b));
  }
}

TEST(DetectionMeta, Validate) {
  const KeypointSet kp = project(Pose(Quat::Identity(), Vec3(0, 0, 1)), cuboid10(), {});
  DetectionMeta m;
  m.keypoint_sigma.assign(9, 1.0);
  EXPECT_NO_THROW(m.validate(kp));
  m.keypoint_sigma[2] = 0.0;
  EXPECT_THROW(m.validate(kp), ValidationError);
  KeypointSet hidden = kp;
  hidden.visible[2] = false;
  EXPECT_NO_THROW(m.validate(hidden));
  m.keypoint_sigma.pop_back();
  EXPECT_THROW(m.validate(kp), ValidationError);
}

TEST(GuapoUq, MatchesTwoPassOracle) {
  Rng rng(61);
  for (int trial = 0; trial < 5; ++trial) {
    const Frame f = noisy_frame(rng, 2.0);
    const std::uint64_t seed = rng.next_u64();
    GuapoOptions opt;
    opt.samples = 50;
    EXPECT_EQ(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, seed),
              guapo_oracle(f, 50, seed, true));
    opt.reduction = GuapoReduction::kTranslationStd;
    EXPECT_NEAR(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, seed),
                guapo_oracle(f, 50, seed, false), 1e-15);
  }
}

TEST(GuapoUq, DeterministicGivenSeed) {
  Rng rng(62);
  const Frame f = noisy_frame(rng, 2.0);
  const GuapoOptions opt;
  EXPECT_EQ(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 9),
            guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 9));
  EXPECT_NE(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 9),
            guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 10));
}

TEST(GuapoUq, VanishingSigmas) {
  Rng rng(63);
  for (int trial = 0; trial < 20; ++trial) {
    Frame f = noisy_frame(rng, 2.0);
    f.meta.keypoint_sigma.assign(9, 1e-9);
    EXPECT_LT(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, {}, rng.next_u64()), 1e-6);
  }
}

TEST(GuapoUq, GrowsWithSigmaScale) {
  Rng rng(64);
  double base = 0.0;
  double doubled = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Frame f = noisy_frame(rng, 2.0);
    const std::uint64_t seed = rng.next_u64();
    GuapoOptions opt;
    base += guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, seed);
    opt.sigma_scale = 2.0;
    doubled += guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, seed);
  }
  EXPECT_GT(doubled, base);
}

TEST(GuapoUq, UsesSeparateAddCloud) {
  Rng rng(65);
  const Frame f = noisy_frame(rng, 2.0);
  const PointCloud far({Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0)}, "far");
  const GuapoOptions opt;
  EXPECT_GT(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 5, &far),
            guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 5));
}

TEST(GuapoUq, InvalidInputs) {
  Rng rng(66);
  const Frame f = noisy_frame(rng, 2.0);
  GuapoOptions opt;
  opt.samples = 1;
  EXPECT_THROW(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 1), ValidationError);
  opt = {};
  opt.sigma_scale = 0.0;
  EXPECT_THROW(guapo_uq(f.keypoints, f.meta, cuboid10(), {}, opt, 1), ValidationError);

  KeypointSet few = f.keypoints;
  for (std::size_t i = 0; i < 4; ++i) few.visible[i] = false;
  EXPECT_THROW(guapo_uq(few, f.meta, cuboid10(), {}, {}, 1), ValidationError);
}

TEST(GuapoReductionNames, RoundTrip) {
  for (auto r : {GuapoReduction::kRmsAdd, GuapoReduction::kTranslationStd}) {
    EXPECT_EQ(parse_guapo_reduction(to_string(r)), r);
  }
  EXPECT_FALSE(parse_guapo_reduction("variance").has_value());
}

}  // namespace
}  // namespace poseuq
