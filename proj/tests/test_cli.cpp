#include <gtest/gtest.h>

#include "cli_harness.hpp"
#include "mrfup/io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using cli::run;

namespace {

fs::path synth16(const std::string& name) {
  const fs::path dir = cli::fresh_dir(name);
  cli::write(dir / "scene.json", cli::scene_json(16, 16));
  const auto r = run("synth --scene \"" + (dir / "scene.json").string() + "\" --out-dir \"" +
                         (dir / "in").string() + "\" --ratio 0.1 --mode random --seed 4",
                     dir);
  EXPECT_EQ(r.code, 0) << r.err;
  return dir;
}

}  // namespace

TEST(Cli, UpsampleSmokeAndOutputs) {
  const fs::path dir = synth16("smoke");
  const auto r = run("upsample --config \"" + (dir / "in" / "upsample.json").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"dense.pfm", "variance.pfm", "dense.ply", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "in" / f)) << f;
  }
  const auto depth = mrfup::io::read_pfm(dir / "in" / "dense.pfm");
  EXPECT_EQ(depth.width, 16);
  const auto cloud = mrfup::io::read_ply(dir / "in" / "dense.ply");
  EXPECT_EQ(cloud.size(), 256u);
  ASSERT_TRUE(cloud[20].normal);
  ASSERT_TRUE(cloud[20].variance);
  const std::string summary = cli::slurp(dir / "in" / "summary.json");
  for (const char* key : {"final_cost", "iterations", "termination", "filtered_px"}) {
    EXPECT_NE(summary.find(key), std::string::npos) << key;
  }
}

TEST(Cli, UpsampleFromPointCloud) {
  const fs::path dir = synth16("cloud");
  auto cfg = nlohmann::json::parse(cli::slurp(dir / "in" / "upsample.json"));
  cfg["inputs"].erase("sparse_depth");
  cfg["inputs"]["points"] = "cloud.ply";
  cfg["outputs"] = {{"depth", "from_cloud.pfm"}};
  cli::write(dir / "in" / "cloud.json", cfg.dump());
  const auto r = run("upsample --config \"" + (dir / "in" / "cloud.json").string() + "\"", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = mrfup::io::read_pfm(dir / "in" / "from_cloud.pfm");
  EXPECT_EQ(a.data.size(), 256u);
}

TEST(Cli, MissingInputNamesPath) {
  const fs::path dir = synth16("missing");
  fs::remove(dir / "in" / "rgb.ppm");
  const auto r = run("upsample --config \"" + (dir / "in" / "upsample.json").string() + "\"", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("rgb.ppm"), std::string::npos);
  EXPECT_EQ(r.err.rfind("error: io: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, BadConfigExitsOne) {
  const fs::path dir = cli::fresh_dir("badcfg");
  cli::write(dir / "c.json", "{\"camera\": {}}");
  const auto r = run("upsample --config \"" + (dir / "c.json").string() + "\"", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
  EXPECT_EQ(run("upsample", dir).code, 1);
  EXPECT_EQ(run("upsample --config \"" + (dir / "none.json").string() + "\"", dir).code, 2);
}

TEST(Cli, UpsampleDeterministic) {
  const fs::path dir = synth16("determinism");
  const std::string cfg = "upsample --config \"" + (dir / "in" / "upsample.json").string() + "\"";
  ASSERT_EQ(run(cfg, dir).code, 0);
  const std::string a = cli::slurp(dir / "in" / "dense.pfm");
  const std::string va = cli::slurp(dir / "in" / "variance.pfm");
  ASSERT_EQ(run(cfg, dir).code, 0);
  EXPECT_EQ(a, cli::slurp(dir / "in" / "dense.pfm"));
  EXPECT_EQ(va, cli::slurp(dir / "in" / "variance.pfm"));
}

namespace {

std::string bench_json(const std::string& ratios) {
  return R"({"scenes": [{"name": "p", "seed": 2, "width": 24, "height": 24,
                          "planes": [{"normal": [0.3, -0.2, 1.0], "offset": 5.0}]}],
             "ratios": )" + ratios + R"(, "modes": ["equidistant", "random"], "seeds": [5],
             "output": "out.csv"})";
}

}  // namespace

TEST(Cli, BenchmarkRowsAndDeterminism) {
  const fs::path dir = cli::fresh_dir("bench");
  cli::write(dir / "b.json", bench_json("[0.05, 0.2]"));
  const std::string cmd = "benchmark --config \"" + (dir / "b.json").string() + "\"";
  const auto r = run(cmd, dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string first = cli::slurp(dir / "out.csv");
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 9);
  EXPECT_EQ(first.rfind("scene,method,mode,ratio_requested", 0), 0u);
  ASSERT_EQ(run(cmd, dir).code, 0);
  EXPECT_EQ(cli::strip_runtime(first), cli::strip_runtime(cli::slurp(dir / "out.csv")));
}

TEST(Cli, BenchmarkEmptyRatiosRejected) {
  const fs::path dir = cli::fresh_dir("bench_empty");
  cli::write(dir / "b.json", bench_json("[]"));
  const auto r = run("benchmark --config \"" + (dir / "b.json").string() + "\"", dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ratios"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out.csv"));
}

TEST(Cli, BenchmarkFailedCellRecorded) {
  const fs::path dir = cli::fresh_dir("bench_fail");
  // Too sparse for three observations on a 4x4 grid.
  cli::write(dir / "b.json", R"({"scenes": [{"name": "tiny", "width": 4, "height": 4,
      "planes": [{"normal": [0, 0, 1], "offset": 3}]}],
      "ratios": [0.01], "modes": ["random"], "seeds": [1], "output": "out.csv"})");
  const auto r = run("benchmark --config \"" + (dir / "b.json").string() + "\"", dir);
  EXPECT_NE(r.code, 0);
  const std::string csv = cli::slurp(dir / "out.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.find(",\n"), std::string::npos);
}

TEST(Cli, FilterCounts) {
  const fs::path dir = cli::fresh_dir("filter");
  mrfup::io::FloatImage depth{4, 3, {}}, var{4, 3, {}};
  for (int k = 0; k < 12; ++k) {
    depth.data.push_back(1.0f + k);
    var.data.push_back(0.1f * k);
  }
  var.data[3] = std::numeric_limits<float>::quiet_NaN();
  mrfup::io::write_pfm(dir / "d.pfm", depth);
  mrfup::io::write_pfm(dir / "v.pfm", var);
  auto filt = [&](const std::string& thr) {
    return run("filter --depth \"" + (dir / "d.pfm").string() + "\" --var \"" + (dir / "v.pfm").string() +
                   "\" --threshold " + thr + " --out \"" + (dir / "o.pfm").string() + "\"",
               dir);
  };
  auto r = filt("1e9");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "kept 11 filtered 1\n");
  auto o = mrfup::io::read_pfm(dir / "o.pfm");
  for (int k = 0; k < 12; ++k)
    if (k != 3) EXPECT_EQ(o.data[k], depth.data[k]);

  r = filt("0");
  EXPECT_EQ(r.out, "kept 0 filtered 12\n");
  o = mrfup::io::read_pfm(dir / "o.pfm");
  for (float v : o.data) EXPECT_TRUE(std::isnan(v));

  r = filt("0.55");
  EXPECT_EQ(r.out, "kept 5 filtered 7\n");

  mrfup::io::write_pfm(dir / "v.pfm", mrfup::io::FloatImage{3, 4, std::vector<float>(12, 0.0f)});
  r = filt("1");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: config: ", 0), 0u);
}
