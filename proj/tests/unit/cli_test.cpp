#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DECSIM_CLI) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path workdir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "decsim-cli-test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& path, const std::string& body) {
  std::ofstream(path) << body;
  return path;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

const std::string kSmall = R"({
  "strategy": "d_ring", "n_workers": 4, "epochs": 2, "batch_size": 8, "seed": 1,
  "dataset": {"n_samples": 200, "input_dim": 3, "n_classes": 2}
})";

}  // namespace

TEST(Cli, MinimalRunWritesArtifacts) {
  const auto dir = workdir("minimal");
  const auto cfg = write(dir / "c.json", kSmall);
  const auto r = run("run " + cfg.string() + " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
  const auto csv = lines(slurp(dir / "out" / "metrics.csv"));
  ASSERT_FALSE(csv.empty());
  EXPECT_EQ(csv[0],
            "run_id,strategy,epoch,iteration,kind,tensor,mean_train_loss,test_accuracy,train_accuracy,gini,"
            "index_of_dispersion,coefficient_of_variation,quartile_coefficient,zero_mean,zero_quartile_sum");
}

TEST(Cli, RerunIsByteIdentical) {
  const auto dir = workdir("rerun");
  const auto cfg = write(dir / "c.json", kSmall);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir / "b").string()).code, 0);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
}

TEST(Cli, TomlConfigRuns) {
  const auto dir = workdir("toml");
  EXPECT_EQ(run("run " + std::string(DECSIM_SOURCE_DIR) + "/configs/minimal.toml --epochs 1 --out " + (dir / "o").string()).code, 0);
}

TEST(Cli, ConfigAndReadErrors) {
  const auto dir = workdir("config");
  const auto bad = write(dir / "bad.json", R"({"strategy": "d_ring", "bogus": 1})");
  EXPECT_EQ(run("run " + bad.string()).code, 2);
  EXPECT_EQ(run("run " + (dir / "missing.json").string()).code, 4);
  EXPECT_EQ(run("graph dump --kind torus --n 8").code, 2);
  EXPECT_EQ(run("run").code, 2);
}

TEST(Cli, DivergenceExitsThree) {
  const auto dir = workdir("diverge");
  auto doc = nlohmann::json::parse(kSmall);
  doc["schedule"] = {{"kind", "constant"}, {"base_lr", 1e300}};
  const auto cfg = write(dir / "c.json", doc.dump());
  EXPECT_EQ(run("run " + cfg.string() + " --out " + (dir / "o").string()).code, 3);
}

TEST(Cli, UnwritableOutputExitsFour) {
  const auto dir = workdir("io");
  const auto cfg = write(dir / "c.json", kSmall);
  write(dir / "blocker", "x");
  EXPECT_EQ(run("run " + cfg.string() + " --out " + (dir / "blocker" / "sub").string()).code, 4);
}

TEST(Cli, GraphDump) {
  const auto ring = nlohmann::json::parse(run("graph dump --kind ring --n 9").out);
  EXPECT_EQ(ring["topology"]["n"], 9);
  EXPECT_EQ(ring["topology"]["neighbors"][0].size(), 2u);
  const auto complete = nlohmann::json::parse(run("graph dump --kind complete --n 9").out);
  EXPECT_NEAR(complete["spectral"]["spectral_gap"].get<double>(), 1.0, 1e-10);
  const auto expo = nlohmann::json::parse(run("graph dump --kind exponential --n 9").out);
  EXPECT_EQ(expo["topology"]["neighbors"][1], (std::vector<int>{2, 3, 5, 0}));
}

TEST(Cli, SchedulePreviewAda) {
  const auto dir = workdir("preview");
  auto doc = nlohmann::json::parse(kSmall);
  doc["strategy"] = "d_adaptive";
  doc["n_workers"] = 240;
  doc["dataset"]["n_samples"] = 4800;
  doc["batch_size"] = 4;
  doc["k0"] = 112;
  doc["gamma_k"] = 1.0;
  doc["epochs"] = 300;
  auto cfg = write(dir / "a.json", doc.dump());
  auto rows = lines(run("schedule preview " + cfg.string()).out);
  ASSERT_EQ(rows.size(), 301u);
  EXPECT_EQ(rows[0], "epoch,k,lr,degree,message_volume");
  EXPECT_EQ(rows[111].substr(0, 6), "110,2,");
  EXPECT_EQ(rows[110].substr(0, 6), "109,3,");

  doc["n_workers"] = 24;
  doc["dataset"]["n_samples"] = 480;
  doc["k0"] = 10;
  doc["gamma_k"] = 0.02;
  cfg = write(dir / "b.json", doc.dump());
  rows = lines(run("schedule preview " + cfg.string()).out);
  EXPECT_EQ(rows[300].substr(0, 6), "299,5,");

  const auto constant = lines(run("schedule preview " + write(dir / "c.json", kSmall).string()).out);
  std::set<std::string> lr;
  for (std::size_t i = 1; i < constant.size(); ++i) {
    std::istringstream in(constant[i]);
    std::string epoch, k, rate;
    std::getline(in, epoch, ',');
    std::getline(in, k, ',');
    std::getline(in, rate, ',');
    lr.insert(rate);
  }
  EXPECT_EQ(constant.size(), 3u);
  EXPECT_EQ(lr.size(), 1u);
}

TEST(Cli, SweepRanksArePermutations) {
  const auto dir = workdir("sweep");
  auto doc = nlohmann::json::parse(kSmall);
  doc["n_workers"] = 16;
  doc["dataset"]["n_samples"] = 800;
  doc["gamma_k"] = 1.0;
  doc["epochs"] = 1;
  doc["sweep"] = {{"strategies", {"c_complete", "d_complete", "d_ring", "d_torus", "d_adaptive"}}, {"seeds", {1, 2}}};
  const auto cfg = write(dir / "s.json", doc.dump());
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir / "o").string()).code, 0);
  const auto rows = lines(slurp(dir / "o" / "ranks.csv"));
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0], "n_workers,seed,iteration,c_complete,d_complete,d_ring,d_torus,d_adaptive");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::istringstream in(rows[i]);
    std::vector<int> cols;
    for (std::string f; std::getline(in, f, ',');) cols.push_back(std::stoi(f));
    ASSERT_EQ(cols.size(), 8u);
    std::multiset<int> ranks(cols.begin() + 3, cols.end());
    EXPECT_EQ(ranks, (std::multiset<int>{1, 2, 3, 4, 5})) << rows[i];
  }
  EXPECT_TRUE(fs::exists(dir / "o" / "summary.json"));
}
