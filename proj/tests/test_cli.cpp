// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace trajattn;
namespace fs = std::filesystem;

#ifndef TRAJATTN_CLI
#error "TRAJATTN_CLI must name the command-line binary"
#endif

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = trajattn::testing::temp_dir("cli");
    ASSERT_EQ(run("synth --output scene.csv --labels labels.csv --n-pedestrians 60 --n-frames 400 "
                  "--anomaly-rate 0.1 --seed 3").code, 0);
    ASSERT_EQ(run("train --scene scene.csv --model m.tjf --log log.csv --clusters clusters.csv "
                  "--hidden-size 4 --embedding-size 3 --epochs 2 --stride 10").code, 0);
  }

  static Result run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" TRAJATTN_CLI "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir_ / "stdout.txt");
    r.err = slurp(dir_ / "stderr.txt");
    return r;
  }

  static fs::path path(const std::string& name) { return dir_ / name; }

  static inline fs::path dir_;
};

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

double report_value(const std::string& csv, const std::string& metric, const std::string& method) {
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    const auto parts = csv::split(line);
    if (parts.size() == 5 && parts[0] == metric && parts[2] == method) return std::stod(std::string(parts[3]));
  }
  return -1.0;
}

}  // namespace

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --no-such-flag 1").code, 2);
  const auto r = run("train --set nonsense=1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nonsense"), std::string::npos);
  EXPECT_EQ(run("train --scene scene.csv --epochs 0").code, 2);
  EXPECT_EQ(run("train --scene scene.csv --ablation everything").code, 2);
  EXPECT_EQ(run("detect --model m.tjf --scene scene.csv --method magic").code, 2);
  EXPECT_EQ(run("eval --model m.tjf --scene scene.csv --metric-denominator mean").code, 2);
  EXPECT_EQ(run("synth --output x.csv --zone-layout nowhere").code, 2);
}

TEST_F(Cli, DataErrorsExitThree) {
  EXPECT_EQ(run("train --scene missing.csv").code, 3);
  {
    std::ofstream os(path("bad.csv"));
    os << "frame_id,pedestrian_id,x,y\n1,1,0.5,0.5\n2,1,oops,0.5\n";
  }
  const auto r = run("train --scene bad.csv");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  {
    std::ofstream os(path("junk.tjf"));
    os << "not a model";
  }
  EXPECT_EQ(run("eval --model junk.tjf --scene scene.csv").code, 3);
  EXPECT_EQ(run("eval --model absent.tjf --scene scene.csv").code, 3);
}

TEST_F(Cli, SynthIsDeterministic) {
  ASSERT_EQ(run("synth --output again.csv --labels again_labels.csv --n-pedestrians 60 --n-frames 400 "
                "--anomaly-rate 0.1 --seed 3").code, 0);
  EXPECT_EQ(slurp(path("scene.csv")), slurp(path("again.csv")));
  EXPECT_EQ(slurp(path("labels.csv")), slurp(path("again_labels.csv")));
  std::ifstream in(path("scene.csv"));
  const Scene s = parse_trajectories(in);
  EXPECT_GT(s.trajectories.size(), 30u);
}

TEST_F(Cli, TrainingIsDeterministic) {
  ASSERT_EQ(run("train --scene scene.csv --model m2.tjf --log log2.csv --hidden-size 4 --embedding-size 3 "
                "--epochs 2 --stride 10").code, 0);
  EXPECT_EQ(slurp(path("m.tjf")), slurp(path("m2.tjf")));
  const auto set = load_model(path("m.tjf"));
  EXPECT_EQ(set.config().hidden_size, 4u);
  EXPECT_EQ(set.ablation, Ablation::cmb);
  EXPECT_FALSE(slurp(path("clusters.csv")).empty());
  // One log per cluster model.
  for (const auto& d : set.descriptors) {
    if (!set.models.contains(d.cluster_id)) continue;
    const auto log = slurp(path("log_c" + std::to_string(d.cluster_id) + ".csv"));
    EXPECT_EQ(lines(log), 3u) << d.cluster_id;
  }
}

TEST_F(Cli, ConfigFileAndOverrides) {
  {
    std::ofstream os(path("run.cfg"));
    os << "# comment\nscene = scene.csv\nmodel = sc.tjf\nablation = sc\nhidden_size = 4\nembedding_size = 3\n"
          "epochs = 1\nstride = 10\nlog = sc_log.csv\n";
  }
  ASSERT_EQ(run("train --config run.cfg --set hidden_size=5").code, 0);
  const auto set = load_model(path("sc.tjf"));
  ASSERT_TRUE(set.single_model);
  EXPECT_EQ(set.single_model->config.hidden_size, 5u);
  EXPECT_EQ(lines(slurp(path("sc_log.csv"))), 2u);
}

TEST_F(Cli, ModelOptionsAreStored) {
  ASSERT_EQ(run("train --scene scene.csv --model vp.tjf --log vp_log.csv --hidden-size 4 --embedding-size 3 "
                "--epochs 1 --stride 10 --ablation sc --velocity-prior true --normalize-hardwired true").code, 0);
  const auto set = load_model(path("vp.tjf"));
  ASSERT_TRUE(set.single_model);
  EXPECT_TRUE(set.single_model->config.velocity_prior);
  EXPECT_TRUE(set.single_model->config.normalize_hardwired);
}

TEST_F(Cli, EvalReportAndDenominators) {
  ASSERT_EQ(run("eval --model m.tjf --scene scene.csv --report literal.csv").code, 0);
  ASSERT_EQ(run("eval --model m.tjf --scene scene.csv --report terms.csv --metric-denominator terms").code, 0);
  const auto lit = slurp(path("literal.csv")), terms = slurp(path("terms.csv"));
  EXPECT_EQ(lit.rfind("metric,dataset,method,value,count\n", 0), 0u);
  const double a = report_value(lit, "ADE", "OUR_cmb"), b = report_value(terms, "ADE", "OUR_cmb");
  ASSERT_GT(b, 0.0);
  EXPECT_NEAR(a / b, 20.0 / 19.0, 1e-12);
  EXPECT_GT(report_value(lit, "ADE", "CV"), 0.0);
  EXPECT_EQ(report_value(lit, "FDE", "OUR_cmb"), report_value(terms, "FDE", "OUR_cmb"));
  ASSERT_EQ(run("eval --model m.tjf --scene scene.csv --report nobase.csv --baseline false").code, 0);
  EXPECT_EQ(report_value(slurp(path("nobase.csv")), "ADE", "CV"), -1.0);
}

TEST_F(Cli, PredictWritesHorizon) {
  ASSERT_EQ(run("predict --model m.tjf --scene scene.csv --predictions p.csv").code, 0);
  const auto p = slurp(path("p.csv"));
  EXPECT_EQ(p.rfind("pedestrian_id,step,x,y\n", 0), 0u);
  EXPECT_EQ((lines(p) - 1) % 20, 0u);
  EXPECT_GT(lines(p), 20u);
  EXPECT_NE(p.find(",21,"), std::string::npos);
  EXPECT_NE(p.find(",40,"), std::string::npos);
  EXPECT_EQ(p.find(",41,"), std::string::npos);
  EXPECT_EQ(run("predict --model m.tjf --scene scene.csv --instances 99999").code, 2);
}

TEST_F(Cli, DetectWithConfusion) {
  const auto h = run("detect --model m.tjf --scene scene.csv --labels labels.csv --confusion true");
  ASSERT_EQ(h.code, 0) << h.err;
  EXPECT_NE(h.out.find("Ground Truth"), std::string::npos);
  EXPECT_NE(h.out.find("recall"), std::string::npos);
  EXPECT_EQ(slurp(path("detections.csv")).rfind("pedestrian_id,label,score\n", 0), 0u);
  const auto n = run("detect --model m.tjf --scene scene.csv --method naive --labels labels.csv --confusion true");
  ASSERT_EQ(n.code, 0) << n.err;
  EXPECT_NE(n.out.find("naive threshold"), std::string::npos);
  EXPECT_EQ(run("detect --model m.tjf --scene scene.csv --confusion true").code, 2);
}

TEST_F(Cli, PlotWritesFiles) {
  ASSERT_EQ(run("plot --model m.tjf --scene scene.csv --plot-dir figs --plot-count 2").code, 0);
  std::size_t svg = 0, csv_files = 0;
  for (const auto& e : fs::directory_iterator(path("figs"))) {
    svg += e.path().extension() == ".svg" ? 1 : 0;
    csv_files += e.path().extension() == ".csv" ? 1 : 0;
  }
  EXPECT_EQ(svg, 2u);
  EXPECT_EQ(csv_files, 2u);
}

TEST_F(Cli, HelpExitsZero) {
  const auto r = run("--help-all");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--hidden-size"), std::string::npos);
}
