// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"

using namespace trajattn;

namespace {

SynthConfig small(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.n_pedestrians = 30;
  c.n_frames = 400;
  return c;
}

double min_pair_distance(const Scene& s, std::int64_t a, std::int64_t b) {
  const Trajectory* ta = s.find(a);
  const Trajectory* tb = s.find(b);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& oa : ta->frames) {
    for (const auto& ob : tb->frames) {
      if (oa.frame == ob.frame) best = std::min(best, distance(oa.pos, ob.pos));
    }
  }
  return best;
}

}  // namespace

TEST(Synth, SameSeedIsBitwiseIdentical) {
  const auto a = synth_generate(small(4));
  const auto b = synth_generate(small(4));
  EXPECT_EQ(a.scene, b.scene);
  EXPECT_EQ(a.labels, b.labels);
  const auto c = synth_generate(small(5));
  EXPECT_FALSE(a.scene == c.scene);
}

TEST(Synth, NoInteractionGivesStraightConstantVelocity) {
  auto cfg = small(2);
  cfg.interaction_strength = 0.0;
  cfg.zone_layout = "crossing";
  const auto r = synth_generate(cfg);
  ASSERT_FALSE(r.scene.trajectories.empty());
  for (const auto& t : r.scene.trajectories) {
    const auto p = t.points();
    // The first frame carries the spawn substeps; compare later steps.
    for (std::size_t i = 2; i + 1 < p.size(); ++i) {
      const Point d0 = p[i] - p[i - 1], d1 = p[i + 1] - p[i];
      if (i + 2 == p.size()) break;  // arrival frame
      EXPECT_NEAR(cross(d0, d1), 0.0, 1e-9) << t.pedestrian_id;
      EXPECT_NEAR(norm(d0), norm(d1), 1e-9) << t.pedestrian_id;
    }
    EXPECT_TRUE(t.contiguous());
  }
}

TEST(Synth, RepulsionKeepsHeadOnWalkersApart) {
  SynthConfig cfg;
  cfg.n_pedestrians = 2;
  cfg.n_frames = 200;
  cfg.zone_layout = "3,10>27,10;27,10>3,10";
  cfg.zone_radius = 0.0;
  cfg.speed_std = 0.0;
  double with = 0, without = 0;
  for (std::uint64_t seed = 1; seed < 200; ++seed) {
    cfg.seed = seed;
    cfg.interaction_strength = 0.0;
    const auto a = synth_generate(cfg);
    if (a.labels[0].route == a.labels[1].route) continue;
    // Both must be walking at the same time to meet.
    const auto& t0 = a.scene.trajectories[0];
    const auto& t1 = a.scene.trajectories[1];
    if (std::abs(t0.first_frame() - t1.first_frame()) > 30) continue;
    without = min_pair_distance(a.scene, 1, 2);
    cfg.interaction_strength = 1.0;
    with = min_pair_distance(synth_generate(cfg).scene, 1, 2);
    break;
  }
  ASSERT_GT(with, 0.0) << "no head-on seed found";
  EXPECT_GT(with, without);
  // On a shared line they pass within half a frame's walk of each other.
  EXPECT_LT(without, 0.35);
}

TEST(Synth, AnomalyLabelsMatchRate) {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.n_pedestrians = 400;
  cfg.n_frames = 600;
  cfg.anomaly_rate = 0.1;
  const auto r = synth_generate(cfg);
  ASSERT_EQ(r.labels.size(), 400u);
  std::size_t abnormal = 0;
  for (const auto& l : r.labels) {
    if (l.abnormal) {
      ++abnormal;
      EXPECT_NE(l.kind, AnomalyKind::none);
    } else {
      EXPECT_EQ(l.kind, AnomalyKind::none);
    }
  }
  EXPECT_GT(abnormal, 20u);
  EXPECT_LT(abnormal, 60u);
}

TEST(Synth, VelocityAnomalySpeedsUp) {
  SynthConfig cfg;
  cfg.seed = 3;
  cfg.n_pedestrians = 60;
  cfg.n_frames = 500;
  cfg.interaction_strength = 0.0;
  cfg.anomaly_rate = 1.0;
  cfg.anomaly_turn_share = 0.0;
  cfg.anomaly_onset_min = cfg.anomaly_onset_max = 10;
  const auto r = synth_generate(cfg);
  std::size_t checked = 0;
  for (const auto& l : r.labels) {
    if (!l.abnormal) continue;
    const auto* t = r.scene.find(l.pedestrian_id);
    if (t->length() < 20) continue;
    const auto p = t->points();
    const double before = distance(p[8], p[5]) / 3.0;
    const double after = distance(p[18], p[15]) / 3.0;
    EXPECT_NEAR(after / before, cfg.anomaly_speed_factor, 0.05 * cfg.anomaly_speed_factor);
    ++checked;
  }
  EXPECT_GT(checked, 10u);
}

TEST(Synth, InvalidConfigs) {
  SynthConfig cfg;
  cfg.zone_layout = "nowhere";
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg.zone_layout = "1,2>oops";
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  cfg.zone_layout = "50,2>3,3";  // outside the scene
  EXPECT_THROW(synth_generate(cfg), ConfigError);
  SynthConfig neg;
  neg.interaction_strength = -1.0;
  EXPECT_THROW(synth_generate(neg), ConfigError);
}

TEST(Synth, TracksStayInsideScene) {
  const auto r = synth_generate(small(9));
  for (const auto& t : r.scene.trajectories) {
    for (const auto& o : t.frames) {
      EXPECT_GE(o.pos.x, 0.0);
      EXPECT_LE(o.pos.x, 30.0);
      EXPECT_GE(o.pos.y, 0.0);
      EXPECT_LE(o.pos.y, 20.0);
    }
  }
}
