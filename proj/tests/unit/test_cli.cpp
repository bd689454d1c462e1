// Copyright 2026 The Leop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = -1;
  std::string output;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("leop_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  Result run(const std::string& args, const std::string& env = "") {
    const fs::path log = dir_ / "log.txt";
    const std::string cmd = env + " " + std::string(LEOP_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = slurp(log);
    return r;
  }

  json base() const {
    return {{"seed", 5},
            {"threads", 1},
            {"schedule", {{"T", 6}}},
            {"model", {{"layers", 2}, {"hidden", 8}, {"edge_hidden", 6}, {"knn", 4}, {"time_dim", 4}, {"rbf", 6}}},
            {"train", {{"epochs", 2}, {"batch_size", 4}}},
            {"affinity_train", {{"epochs", 1}, {"batch_size", 4}}},
            {"data", {{"dataset_dir", (dir_ / "data").string()}}},
            {"sampling", {{"n_samples", 3}, {"targets", {0, 1}}}},
            {"weights", (dir_ / "w.leop").string()}};
  }

  fs::path make_data(int n = 10) {
    json j = base();
    j["data"]["spec"] = {{"n_complexes", n}, {"random_seed", 3}};
    const auto cfg = write_config("gen.json", j);
    const Result r = run("gen-data --config " + cfg.string() + " --output " + (dir_ / "data").string());
    EXPECT_EQ(r.code, 0) << r.output;
    return dir_ / "data";
  }

  fs::path dir_;
};

TEST_F(Cli, GenDataWritesPairsAndManifest) {
  const fs::path data = make_data(10);
  const json ds = json::parse(slurp(data / "dataset.json"));
  ASSERT_EQ(ds.size(), 10u);
  for (const auto& e : ds) {
    EXPECT_TRUE(fs::exists(data / e["pocket_file"].get<std::string>()));
    EXPECT_TRUE(fs::exists(data / e["ligand_file"].get<std::string>()));
    EXPECT_FALSE(e["mask_indices"].empty());
  }
  EXPECT_TRUE(fs::exists(data / "oracle_scores.csv"));
  const std::string first = slurp(data / "ligands" / "ligand_00004.sdf");
  const std::string pocket = slurp(data / "pockets" / "pocket_00004.pdb");
  const std::string scores = slurp(data / "oracle_scores.csv");
  make_data(10);
  EXPECT_EQ(slurp(data / "ligands" / "ligand_00004.sdf"), first);
  EXPECT_EQ(slurp(data / "pockets" / "pocket_00004.pdb"), pocket);
  EXPECT_EQ(slurp(data / "oracle_scores.csv"), scores);
}

TEST_F(Cli, InvalidDatasetFieldIsNamed) {
  json j = base();
  j["data"]["spec"] = {{"n_complexes", "ten"}};
  const Result r = run("gen-data --config " + write_config("c.json", j).string() + " --output " + (dir_ / "d").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("n_complexes"), std::string::npos) << r.output;
}

TEST_F(Cli, UnknownKeyIsRejected) {
  json j = base();
  j["model"]["depth"] = 3;
  const Result r = run("train --config " + write_config("c.json", j).string() + " --output " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("model.depth"), std::string::npos) << r.output;
}

TEST_F(Cli, MissingDatasetNamesThePath) {
  json j = base();
  j["data"]["dataset_dir"] = (dir_ / "nowhere").string();
  const Result r = run("train --config " + write_config("c.json", j).string() + " --output " + (dir_ / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find((dir_ / "nowhere").string()), std::string::npos) << r.output;
}

TEST_F(Cli, BadArgumentsExitWithUsageCode) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("train --config " + (dir_ / "absent.json").string()).code, 2);
}

TEST_F(Cli, TrainResumeSampleEvaluate) {
  make_data(10);
  const auto cfg = write_config("c.json", base());
  const std::string c = " --config " + cfg.string();
  const fs::path train_dir = dir_ / "train";

  Result r = run("train" + c + " --output " + train_dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "w.leop"));
  const json resolved = json::parse(slurp(train_dir / "config.resolved.json"));
  EXPECT_EQ(resolved["weights_hash"].get<std::string>().size(), 16u);
  EXPECT_TRUE(resolved.contains("tool_version"));

  json more = base();
  more["train"]["epochs"] = 3;
  more["train"]["resume"] = true;
  r = run("train --config " + write_config("resume.json", more).string() + " --output " + train_dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("resuming at epoch 2"), std::string::npos) << r.output;
  std::istringstream loss(slurp(train_dir / "loss.csv"));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(loss, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[3].substr(0, 2), "3,");

  r = run("train-affinity" + c + " --output " + (dir_ / "aff").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "aff" / "affinity_loss.csv"));

  json hundred = base();
  hundred["sampling"]["n_samples"] = 100;
  hundred["sampling"]["targets"] = {2};
  r = run("sample --config " + write_config("s.json", hundred).string() + " --output " + (dir_ / "s100").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json m100 = json::parse(slurp(dir_ / "s100" / "manifest.json"));
  EXPECT_EQ(m100["samples"].size(), 100u);
  EXPECT_EQ(m100["task"], "scaffold_decoration");

  json off = base();
  off["guidance"] = {{"enabled", false}};
  const auto off_cfg = write_config("off.json", off);
  ASSERT_EQ(run("sample" + c + " --no-guidance --output " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(run("sample --config " + off_cfg.string() + " --output " + (dir_ / "b").string()).code, 0);
  const json ma = json::parse(slurp(dir_ / "a" / "manifest.json"));
  const json mb = json::parse(slurp(dir_ / "b" / "manifest.json"));
  EXPECT_TRUE(ma["samples"] == mb["samples"]);
  EXPECT_FALSE(ma["guided"].get<bool>());
  for (const auto& row : ma["samples"]) {
    if (row["ligand_file"].is_null()) continue;
    const std::string f = row["ligand_file"];
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f));
  }

  ASSERT_EQ(run("sample" + c + " --output " + (dir_ / "g1").string()).code, 0);
  ASSERT_EQ(run("sample" + c + " --output " + (dir_ / "g2").string()).code, 0);
  const json g1 = json::parse(slurp(dir_ / "g1" / "manifest.json"));
  const json g2 = json::parse(slurp(dir_ / "g2" / "manifest.json"));
  EXPECT_TRUE(g1["samples"] == g2["samples"]);
  EXPECT_EQ(slurp(dir_ / "g1" / "sample_00004.sdf"), slurp(dir_ / "g2" / "sample_00004.sdf"));

  r = run("evaluate" + c + " --output " + (dir_ / "g1").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json report = json::parse(slurp(dir_ / "g1" / "report.json"));
  EXPECT_EQ(report["n_samples"], 6);
  EXPECT_TRUE(fs::exists(dir_ / "g1" / "report.csv"));

  r = run("hop" + c + " --output " + (dir_ / "hop").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const json hop = json::parse(slurp(dir_ / "hop" / "manifest.json"));
  EXPECT_TRUE(hop["samples"][0].contains("fragment_rmsd"));

  json wrong = base();
  wrong["vocab"] = {"C", "N", "O"};
  r = run("sample --config " + write_config("v.json", wrong).string() + " --output " + (dir_ / "v").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("vocabulary"), std::string::npos) << r.output;
}

TEST_F(Cli, SeedPrecedence) {
  make_data(4);
  json j = base();
  j["sampling"]["targets"] = {0};
  const auto cfg = write_config("c.json", j);
  ASSERT_EQ(run("train --config " + cfg.string() + " --output " + (dir_ / "t").string()).code, 0);
  const std::string c = " --config " + cfg.string();
  auto seed_of = [&](const std::string& args, const std::string& env) {
    const fs::path out = dir_ / "seed";
    fs::remove_all(out);
    const Result r = run("sample" + c + args + " --output " + out.string(), env);
    EXPECT_EQ(r.code, 0) << r.output;
    return json::parse(slurp(out / "manifest.json"))["seed"].get<std::uint64_t>();
  };
  EXPECT_EQ(seed_of("", ""), 5u);
  EXPECT_EQ(seed_of("", "LEOP_SEED=11"), 11u);
  EXPECT_EQ(seed_of(" --seed 12", "LEOP_SEED=11"), 12u);
  const Result bad = run("sample" + c + " --output " + (dir_ / "x").string(), "LEOP_SEED=abc");
  EXPECT_EQ(bad.code, 2);
}

}  // namespace
