// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace trajattn;
using namespace trajattn::testing;

namespace {

TrainConfig quick(std::size_t epochs, double lr = 1e-2) {
  TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = lr;
  t.batch_size = 4;
  return t;
}

// Two well separated flows whose tracks never share frames, so every
// neighbourhood is empty.
NormalizedScene two_flow_scene(std::size_t per_flow, std::size_t length) {
  std::vector<Trajectory> tracks;
  std::int64_t frame = 0;
  for (std::size_t i = 0; i < per_flow; ++i) {
    const double dy = 0.05 * static_cast<double>(i);
    tracks.push_back(make_track(static_cast<std::int64_t>(2 * i + 1), frame, line({1.0, 2.0 + dy}, {0.4, 0.01}, length)));
    frame += static_cast<std::int64_t>(length) + 5;
    tracks.push_back(make_track(static_cast<std::int64_t>(2 * i + 2), frame, line({20.0, 18.0 - dy}, {-0.4, -0.02}, length)));
    frame += static_cast<std::int64_t>(length) + 5;
  }
  return normalize(make_scene(tracks));
}

}  // namespace

TEST(Loss, KnownValuesAndLoopOracle) {
  const PointSeq a = line({0, 0}, {1, 1}, 6);
  EXPECT_EQ(loss(a, a), 0.0);
  EXPECT_EQ(loss(line({1, 0}, {1, 1}, 6), a), 1.0);
  Rng rng(1);
  const PointSeq p = random_walk(30, rng, 0.3), q = random_walk(30, rng, 0.3);
  double s = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) s += (p[t].x - q[t].x) * (p[t].x - q[t].x) + (p[t].y - q[t].y) * (p[t].y - q[t].y);
  EXPECT_NEAR(loss(p, q), s / 30.0, 1e-15);
  EXPECT_THROW(loss(p, PointSeq(29)), ArgumentError);
}

TEST(Optimizer, SgdStepIsExact) {
  ParameterStore ps;
  auto& p = ps.add("w", 2, 3);
  Rng rng(2);
  fill_uniform(p.value, 1.0, rng);
  fill_uniform(p.grad, 1.0, rng);
  const Matrix before = p.value, g = p.grad;
  TrainConfig tc;
  tc.optimizer = OptimizerKind::sgd;
  tc.learning_rate = 0.37;
  Optimizer(tc).step(ps);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(p.value.values()[i], before.values()[i] - 0.37 * g.values()[i]);
  }
}

TEST(Optimizer, AdamFirstStepIsSignLike) {
  ParameterStore ps;
  auto& p = ps.add("w", 1, 4);
  p.grad.values()[0] = 2.0;
  p.grad.values()[1] = -0.5;
  p.grad.values()[2] = 0.0;
  p.grad.values()[3] = 1e-3;
  TrainConfig tc;
  tc.learning_rate = 0.01;
  Optimizer(tc).step(ps);
  // Bias correction makes the first step lr * g / (|g| + eps).
  const double g[4] = {2.0, -0.5, 0.0, 1e-3};
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(p.value.values()[i], -0.01 * g[i] / (std::abs(g[i]) + tc.adam_eps), 1e-15) << i;
  }
}

TEST(Optimizer, ClipGradients) {
  ParameterStore ps;
  auto& p = ps.add("w", 1, 2);
  p.grad.values()[0] = 3.0;
  p.grad.values()[1] = 4.0;
  EXPECT_EQ(clip_gradients(ps, 10.0), 5.0);
  EXPECT_EQ(p.grad.values()[0], 3.0);
  clip_gradients(ps, 1.0);
  EXPECT_NEAR(ps.grad_norm(), 1.0, 1e-15);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.epochs = 0;
  EXPECT_THROW(validate(t), ConfigError);
  t = {};
  t.learning_rate = -1.0;
  EXPECT_THROW(validate(t), ConfigError);
  t = {};
  t.batch_size = 0;
  EXPECT_THROW(validate(t), ConfigError);
  EXPECT_THROW(parse_ablation("all"), ConfigError);
  EXPECT_EQ(parse_ablation("sft"), Ablation::sft);
}

TEST(Calibration, InverseRmsStep) {
  const auto c = tiny_config();
  TrainingInstance inst;
  const PointSeq all = line({0.1, 0.1}, {0.006, 0.008}, c.t_pred);
  inst.observed.assign(all.begin(), all.begin() + 5);
  inst.future.assign(all.begin() + 5, all.end());
  EXPECT_NEAR(calibrate_velocity_scale(std::vector<TrainingInstance>{inst}), 100.0, 1e-9);
}

TEST(TrainModel, ZeroLearningRateKeepsInitialization) {
  const auto c = tiny_config();
  Rng rng(3);
  std::vector<TrainingInstance> inst;
  for (int i = 0; i < 5; ++i) inst.push_back(random_instance(c, rng, 2));
  auto tc = quick(3, 0.0);
  const auto m = train_model(inst, c, tc);
  EXPECT_TRUE(m.params.same_values(make_parameters(c, tc.seed)));
}

TEST(TrainModel, SameSeedSameRun) {
  const auto c = tiny_config(6, 5, 9);
  Rng rng(4);
  std::vector<TrainingInstance> inst;
  for (int i = 0; i < 9; ++i) inst.push_back(random_instance(c, rng, 3));
  TrainLog la, lb;
  const auto a = train_model(inst, c, quick(5), &la);
  const auto b = train_model(inst, c, quick(5), &lb);
  ASSERT_EQ(la.epochs.size(), 5u);
  for (std::size_t e = 0; e < 5; ++e) EXPECT_EQ(la.epochs[e].mean_loss, lb.epochs[e].mean_loss);
  EXPECT_TRUE(a.params.same_values(b.params));
  auto other = quick(5);
  other.seed = 2;
  EXPECT_FALSE(a.params.same_values(train_model(inst, c, other).params));
}

TEST(TrainModel, OverfitsOneInstance) {
  ModelConfig c;
  c.hidden_size = 32;
  c.embedding_size = 16;
  c.t_obs = 8;
  c.t_pred = 16;
  Rng rng(5);
  std::vector<TrainingInstance> inst{random_instance(c, rng, 2)};
  // Coordinates of order one so that the loss scale is meaningful.
  for (auto* seq : {&inst[0].observed, &inst[0].future}) {
    for (auto& p : *seq) p = 20.0 * p;
  }
  TrainLog log;
  TrainConfig tc;
  tc.epochs = 2000;
  tc.learning_rate = 1e-3;
  const auto m = train_model(inst, c, tc, &log);
  EXPECT_LT(log.epochs.back().mean_loss, 1e-4);
  std::size_t non_increasing = 0;
  for (std::size_t e = 1; e < log.epochs.size(); ++e) {
    non_increasing += log.epochs[e].mean_loss <= log.epochs[e - 1].mean_loss ? 1 : 0;
  }
  EXPECT_GE(non_increasing, static_cast<std::size_t>(0.9 * static_cast<double>(log.epochs.size() - 1)));
  // Free-running prediction also lands on the truth.
  const auto pred = predict(m.params, m.config, inst[0].observed, inst[0].neighborhood);
  EXPECT_LT(loss(pred, inst[0].future), 1e-2);
}

TEST(TrainModel, WarnsOnSmallClusterAndRejectsBadInput) {
  const auto c = tiny_config();
  Rng rng(6);
  std::vector<TrainingInstance> inst{random_instance(c, rng), random_instance(c, rng)};
  TrainLog log;
  auto tc = quick(1);
  tc.batch_size = 16;
  train_model(inst, c, tc, &log);
  ASSERT_EQ(log.warnings.size(), 1u);
  EXPECT_NE(log.warnings[0].find("batch size reduced"), std::string::npos);
  EXPECT_THROW(train_model(std::vector<TrainingInstance>{}, c, tc), ArgumentError);
  inst[0].future.pop_back();
  EXPECT_THROW(train_model(inst, c, tc), ArgumentError);
}

TEST(TrainModel, DivergenceNamesEpoch) {
  const auto c = tiny_config();
  Rng rng(7);
  std::vector<TrainingInstance> inst{random_instance(c, rng)};
  inst[0].future.back() = {1e200, 1e200};
  try {
    train_model(inst, c, quick(3));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(TrainModel, TrainingLogCsv) {
  TrainLog log;
  log.epochs = {{1, 0.5, 12.0}, {2, 0.25, 11.5}};
  std::ostringstream os;
  write_training_log(os, log);
  EXPECT_EQ(os.str(), "epoch,mean_loss,wall_ms\n1,0.5,12.000\n2,0.25,11.500\n");
}

TEST(PerCluster, TwoFlowsGiveTwoModels) {
  const auto data = two_flow_scene(6, 24);
  auto c = tiny_config(4, 8, 16);
  c.velocity_scale = 0.0;
  TrajectoryClustering clustering;
  std::map<int, TrainLog> logs;
  const auto set = train_per_cluster(data, {}, c, quick(2), Ablation::cmb, {4}, &logs, &clustering);
  EXPECT_EQ(set.models.size(), 2u);
  EXPECT_FALSE(set.single_model);
  EXPECT_EQ(set.descriptors.size(), 2u);
  EXPECT_EQ(logs.size(), 2u);
  for (const auto& d : set.descriptors) {
    EXPECT_EQ(set.models.at(d.cluster_id).config.mode, AttentionMode::combined);
    EXPECT_GT(set.models.at(d.cluster_id).config.velocity_scale, 0.0);
    EXPECT_EQ(&set.select(d.centroid_observed), &set.models.at(d.cluster_id));
  }
  for (std::size_t i = 0; i < clustering.pedestrian_ids.size(); ++i) EXPECT_NE(clustering.assignment.labels[i], kNoise);
}

TEST(PerCluster, SingleModelForSc) {
  const auto data = two_flow_scene(6, 24);
  auto c = tiny_config(4, 8, 16);
  const auto set = train_per_cluster(data, {}, c, quick(1), Ablation::sc, {4});
  EXPECT_TRUE(set.models.empty());
  EXPECT_TRUE(set.descriptors.empty());
  ASSERT_TRUE(set.single_model);
  EXPECT_EQ(&set.select(PointSeq(8)), &*set.single_model);
}

TEST(PerCluster, SoftOnlyMatchesCombinedWithoutNeighbours) {
  const auto data = two_flow_scene(6, 24);
  auto c = tiny_config(4, 8, 16);
  const auto cmb = train_per_cluster(data, {}, c, quick(3), Ablation::cmb, {4});
  const auto sft = train_per_cluster(data, {}, c, quick(3), Ablation::sft, {4});
  ASSERT_EQ(cmb.models.size(), sft.models.size());
  for (const auto& [k, m] : cmb.models) {
    EXPECT_EQ(sft.models.at(k).config.mode, AttentionMode::soft_only);
    EXPECT_TRUE(m.params.same_values(sft.models.at(k).params)) << "cluster " << k;
  }
}

TEST(Persistence, RoundTripIsBitwise) {
  const auto data = two_flow_scene(6, 24);
  auto c = tiny_config(4, 8, 16);
  const auto set = train_per_cluster(data, {}, c, quick(2), Ablation::cmb, {4});
  const auto dir = temp_dir("persist");
  save_model(set, dir / "m.tjf");
  const auto back = load_model(dir / "m.tjf");
  EXPECT_EQ(back.ablation, set.ablation);
  EXPECT_EQ(back.transform, set.transform);
  EXPECT_EQ(back.descriptors, set.descriptors);
  ASSERT_EQ(back.models.size(), set.models.size());
  Rng rng(8);
  for (const auto& [k, m] : set.models) {
    const auto& b = back.models.at(k);
    EXPECT_EQ(b.config, m.config);
    EXPECT_TRUE(b.params.same_values(m.params));
    const auto inst = random_instance(m.config, rng, 3);
    EXPECT_EQ(predict(b.params, b.config, inst.observed, inst.neighborhood),
              predict(m.params, m.config, inst.observed, inst.neighborhood));
  }
  EXPECT_EQ(serialize_model(back), serialize_model(set));
}

TEST(Persistence, SingleModelRoundTrip) {
  ClusterModelSet set;
  set.ablation = Ablation::sc;
  auto c = tiny_config();
  c.normalize_hardwired = true;
  c.velocity_prior = true;
  set.single_model = TrainedModel{c, random_parameters(c, 4)};
  set.transform = {0.1, -3.0, 1.0 / 3.0};
  const auto back = deserialize_model(serialize_model(set));
  ASSERT_TRUE(back.single_model);
  EXPECT_EQ(back.single_model->config, c);
  EXPECT_TRUE(back.single_model->params.same_values(set.single_model->params));
  EXPECT_EQ(back.transform, set.transform);
}

TEST(Persistence, CorruptionIsRejected) {
  ClusterModelSet set;
  set.ablation = Ablation::sc;
  const auto c = tiny_config();
  set.single_model = TrainedModel{c, random_parameters(c, 4)};
  const std::string bytes = serialize_model(set);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(deserialize_model(bytes.substr(0, cut)), LoadError) << cut;
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  EXPECT_THROW(deserialize_model(flipped), LoadError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_model(magic), LoadError);

  // A future format version with a valid checksum.
  std::string body = bytes.substr(0, bytes.size() - 8);
  const auto at = body.find("format_version 1");
  ASSERT_NE(at, std::string::npos);
  body[at + 15] = '7';
  std::string versioned = body;
  detail::put_u64(versioned, detail::fnv1a(body));
  try {
    deserialize_model(versioned);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  EXPECT_THROW(load_model(temp_dir("missing") / "none.tjf"), LoadError);

  const auto dir = temp_dir("truncated");
  {
    std::ofstream os(dir / "t.tjf", std::ios::binary);
    os << bytes.substr(0, bytes.size() - 40);
  }
  EXPECT_THROW(load_model(dir / "t.tjf"), LoadError);
}
