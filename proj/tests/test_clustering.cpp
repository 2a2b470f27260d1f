// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace trajattn;
using namespace trajattn::testing;

namespace {

std::vector<Vector> random_points(Rng& rng, std::size_t n, std::size_t dim) {
  // A few blobs plus uniform clutter.
  const std::size_t blobs = 1 + rng.below(4);
  std::vector<Vector> centers(blobs, Vector(dim));
  for (auto& c : centers) {
    for (double& v : c) v = rng.uniform(0, 10);
  }
  std::vector<Vector> pts(n, Vector(dim));
  for (auto& p : pts) {
    if (rng.bernoulli(0.7)) {
      const auto& c = centers[rng.below(blobs)];
      for (std::size_t d = 0; d < dim; ++d) p[d] = c[d] + rng.normal(0, 0.6);
    } else {
      for (double& v : p) v = rng.uniform(0, 10);
    }
  }
  return pts;
}

std::set<std::set<std::size_t>> groups(const std::vector<int>& labels, const std::vector<std::size_t>& order) {
  std::map<int, std::set<std::size_t>> m;
  for (std::size_t i = 0; i < labels.size(); ++i) m[labels[i]].insert(order[i]);
  std::set<std::set<std::size_t>> out;
  for (auto& [k, g] : m) {
    if (k >= 0) out.insert(g);
  }
  return out;
}

}  // namespace

TEST(Dbscan, TwoSeparatedGroups) {
  std::vector<Vector> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({0.1 * i, 0.0});
  for (int i = 0; i < 5; ++i) pts.push_back({100.0 + 0.1 * i, 0.0});
  const auto r = dbscan(pts, {1.0, 3});
  EXPECT_EQ(r.cluster_count, 2);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
  EXPECT_EQ(r.labels, oracle::dbscan_labels(pts, 1.0, 3));
}

TEST(Dbscan, IsolatedAndDegenerate) {
  std::vector<Vector> one{{1.0, 2.0}};
  EXPECT_EQ(dbscan(one, {0.5, 2}).labels, (std::vector<int>{kNoise}));
  EXPECT_EQ(dbscan(one, {0.5, 1}).labels, (std::vector<int>{0}));
  std::vector<Vector> same(7, Vector{3.0, 3.0, 3.0});
  const auto r = dbscan(same, {1e-9, 7});
  EXPECT_EQ(r.cluster_count, 1);
  for (int l : r.labels) EXPECT_EQ(l, 0);
  EXPECT_EQ(dbscan(std::vector<Vector>{}, {1.0, 2}).cluster_count, 0);
}

TEST(Dbscan, Errors) {
  std::vector<Vector> mixed{{1.0, 2.0}, {1.0}};
  EXPECT_THROW(dbscan(mixed, {1.0, 2}), ArgumentError);
  std::vector<Vector> ok{{1.0}};
  EXPECT_THROW(dbscan(ok, {0.0, 2}), ConfigError);
  EXPECT_THROW(dbscan(ok, {1.0, 0}), ConfigError);
}

TEST(Dbscan, MatchesUnionFindOracle) {
  for (std::uint64_t seed = 1; seed <= 300; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(200);
    const std::size_t dim = 1 + rng.below(4);
    const auto pts = random_points(rng, n, dim);
    const double eps = rng.uniform(0.2, 1.5);
    const std::size_t min_pts = 1 + rng.below(8);
    const auto r = dbscan(pts, {eps, min_pts});
    ASSERT_EQ(r.labels, oracle::dbscan_labels(pts, eps, min_pts)) << "seed " << seed;
    int maxl = -1;
    for (int l : r.labels) maxl = std::max(maxl, l);
    EXPECT_EQ(r.cluster_count, maxl + 1);
  }
}

// Cores and noise never depend on order; border points reachable from two
// clusters may switch sides, so they are compared only when unambiguous.
TEST(Dbscan, PermutationInvariance) {
  std::size_t exact = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed + 1000);
    const std::size_t n = 2 + rng.below(150);
    const auto pts = random_points(rng, n, 2);
    const double eps = rng.uniform(0.3, 1.0);
    const std::size_t min_pts = 2 + rng.below(5);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<Vector> shuffled;
    for (std::size_t i : perm) shuffled.push_back(pts[i]);
    std::vector<std::size_t> ident(n);
    std::iota(ident.begin(), ident.end(), 0);

    const auto a = dbscan(pts, {eps, min_pts});
    const auto b = dbscan(shuffled, {eps, min_pts});
    EXPECT_EQ(a.cluster_count, b.cluster_count);
    std::vector<int> b_back(n);
    for (std::size_t k = 0; k < n; ++k) b_back[perm[k]] = b.labels[k];
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(a.labels[i] == kNoise, b_back[i] == kNoise);

    // Ambiguous border: a non-core point adjacent to cores of two clusters.
    bool ambiguous = false;
    for (std::size_t i = 0; i < n && !ambiguous; ++i) {
      std::set<int> seen;
      std::size_t deg = 0;
      for (std::size_t j = 0; j < n; ++j) deg += squared_distance(pts[i], pts[j]) <= eps * eps ? 1 : 0;
      if (deg >= min_pts) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (squared_distance(pts[i], pts[j]) > eps * eps) continue;
        std::size_t dj = 0;
        for (std::size_t k = 0; k < n; ++k) dj += squared_distance(pts[j], pts[k]) <= eps * eps ? 1 : 0;
        if (dj >= min_pts) seen.insert(a.labels[j]);
      }
      ambiguous = seen.size() > 1;
    }
    if (!ambiguous) {
      EXPECT_EQ(groups(a.labels, ident), groups(b.labels, perm)) << "seed " << seed;
      ++exact;
    }
  }
  EXPECT_GT(exact, 50u);
}

TEST(KthNeighbor, MatchesSortedDistances) {
  Rng rng(12);
  const auto pts = random_points(rng, 40, 3);
  const auto k3 = kth_neighbor_distances(pts, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) d.push_back(std::sqrt(squared_distance(pts[i], pts[j])));
    }
    std::sort(d.begin(), d.end());
    EXPECT_DOUBLE_EQ(k3[i], d[2]);
  }
}

TEST(Features, EntryExit) {
  const Trajectory t = make_track(1, 0, line({0, 0}, {0.25, 0.25}, 5));
  EXPECT_EQ(entry_exit_features(t), (Vector{0, 0, 1, 1}));
  PointSeq rev = t.points();
  std::reverse(rev.begin(), rev.end());
  EXPECT_EQ(entry_exit_features(make_track(2, 0, rev)), (Vector{1, 1, 0, 0}));
  EXPECT_THROW(entry_exit_features(make_track(3, 0, {{0, 0}})), ArgumentError);
}

TEST(Features, ResampledStraightLine) {
  const Trajectory t = make_track(1, 0, line({0, 0}, {0.1, 0.0}, 15));
  const auto f = resampled_features(t, 8);
  ASSERT_EQ(f.size(), 16u);
  const double w = std::sqrt(2.0 / 8.0);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_NEAR(f[2 * k], w * 1.4 * static_cast<double>(k) / 7.0, 1e-12);
    EXPECT_NEAR(f[2 * k + 1], 0.0, 1e-15);
  }
  // The first and last samples keep the entry/exit geometry.
  EXPECT_NEAR(f[0], 0.0, 1e-15);
  EXPECT_NEAR(f[14], w * 1.4, 1e-12);
}

TEST(Features, TwoEntryTwoExitSceneGivesAtMostFourClusters) {
  SynthConfig cfg;
  cfg.seed = 21;
  cfg.n_pedestrians = 120;
  cfg.n_frames = 500;
  cfg.zone_layout = "3,4>27,4;3,16>27,16;3,4>27,16;3,16>27,4";
  const auto ns = normalize(filter_trajectories(synth_generate(cfg).scene, 20));
  std::vector<Vector> feats;
  for (const auto& t : ns.scene.trajectories) feats.push_back(entry_exit_features(t));
  const auto r = dbscan(feats, {});
  EXPECT_GE(r.cluster_count, 2);
  EXPECT_LE(r.cluster_count, 4);
}

TEST(ClusterTrainingSet, SharedZonesGiveOneDescriptor) {
  Rng rng(3);
  std::vector<Trajectory> tracks;
  for (int i = 0; i < 8; ++i) {
    tracks.push_back(make_track(i, 0, line({0.1 + 0.002 * i, 0.5}, {0.02, 0.0}, 40)));
  }
  const auto c = cluster_training_set(make_scene(tracks), {}, 20);
  ASSERT_EQ(c.descriptors.size(), 1u);
  EXPECT_EQ(c.descriptors[0].member_count, 8u);
  EXPECT_EQ(c.descriptors[0].centroid_observed.size(), 20u);
  EXPECT_NEAR(c.descriptors[0].centroid_observed[0].x, 0.107, 1e-12);
}

TEST(ClusterTrainingSet, StrayTrackIsNoise) {
  std::vector<Trajectory> tracks;
  for (int i = 0; i < 6; ++i) tracks.push_back(make_track(i, 0, line({0.1, 0.1 + 0.003 * i}, {0.02, 0.0}, 40)));
  for (int i = 0; i < 6; ++i) tracks.push_back(make_track(10 + i, 0, line({0.9, 0.9 - 0.003 * i}, {-0.02, 0.0}, 40)));
  tracks.push_back(make_track(99, 0, line({0.5, 0.1}, {0.0, 0.02}, 40)));
  const auto c = cluster_training_set(make_scene(tracks), {}, 20);
  EXPECT_EQ(c.descriptors.size(), 2u);
  EXPECT_EQ(c.label_of(99), kNoise);
  EXPECT_EQ(c.label_of(0), 0);
  EXPECT_EQ(c.label_of(12), 1);
  std::size_t members = 0;
  for (const auto& d : c.descriptors) members += d.member_count;
  EXPECT_EQ(members, 12u);
  std::ostringstream os;
  write_cluster_csv(os, c);
  EXPECT_EQ(os.str().substr(0, 31), "pedestrian_id,cluster_id\n0,0\n1,");
  EXPECT_NE(os.str().find("\n99,-1\n"), std::string::npos);
}

TEST(ClusterTrainingSet, Errors) {
  std::vector<Trajectory> tracks{make_track(1, 0, line({0, 0}, {0.1, 0.1}, 10)),
                                 make_track(2, 0, line({0.5, 0}, {0.0, 0.1}, 10))};
  EXPECT_THROW(cluster_training_set(make_scene(tracks), {}, 20), DataError);
  EXPECT_THROW(cluster_training_set(make_scene(tracks), {0.01, 5}, 5), ConfigError);
}

TEST(ClusterTrainingSet, CentroidsStartAtEntryZones) {
  SynthConfig cfg;
  cfg.seed = 9;
  cfg.n_pedestrians = 120;
  cfg.n_frames = 600;
  cfg.zone_layout = "crossing";
  const auto gen = synth_generate(cfg);
  const auto ns = normalize(filter_trajectories(gen.scene, 40));
  const auto c = cluster_training_set(ns.scene, {}, 20);
  ASSERT_EQ(c.descriptors.size(), 4u);
  std::set<std::size_t> matched;
  for (const auto& d : c.descriptors) {
    double best = 1e9;
    std::size_t arg = 0;
    for (std::size_t r = 0; r < gen.routes.size(); ++r) {
      const double dist = distance(d.centroid_observed.front(), ns.transform.apply(gen.routes[r].entry));
      if (dist < best) {
        best = dist;
        arg = r;
      }
    }
    EXPECT_LT(best, 0.1);
    matched.insert(arg);
  }
  EXPECT_EQ(matched.size(), 4u);
  for (const auto& d : c.descriptors) {
    EXPECT_EQ(assign_cluster(d.centroid_observed, c.descriptors), d.cluster_id);
  }
}

TEST(AssignCluster, Basics) {
  std::vector<ClusterDescriptor> ds{{0, line({0, 0}, {0.1, 0}, 4), 3}, {1, line({0, 1}, {0.1, 0}, 4), 3}};
  EXPECT_EQ(assign_cluster(ds[1].centroid_observed, ds), 1);
  EXPECT_EQ(assign_cluster(line({0, 0.5}, {0.1, 0}, 4), ds), 0);  // tie
  std::vector<ClusterDescriptor> single{ds[1]};
  EXPECT_EQ(assign_cluster(line({5, 5}, {0, 0}, 4), single), 1);
  EXPECT_THROW(assign_cluster(line({5, 5}, {0, 0}, 4), std::vector<ClusterDescriptor>{}), ArgumentError);
  EXPECT_THROW(assign_cluster(line({5, 5}, {0, 0}, 3), ds), ShapeError);
}

TEST(AssignCluster, MatchesExhaustiveScan) {
  Rng rng(2);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<ClusterDescriptor> ds;
    for (int k = 0; k < 3; ++k) ds.push_back({k, random_walk(6, rng, 0.05), 1});
    const PointSeq obs = random_walk(6, rng, 0.05);
    int best = -1;
    double best_d = 1e300;
    for (const auto& d : ds) {
      double s = 0.0;
      for (std::size_t j = 0; j < obs.size(); ++j) {
        s += std::sqrt(oracle::sq(obs[j].x - d.centroid_observed[j].x) + oracle::sq(obs[j].y - d.centroid_observed[j].y));
      }
      if (s < best_d) {
        best_d = s;
        best = d.cluster_id;
      }
    }
    EXPECT_EQ(assign_cluster(obs, ds), best);
  }
}
