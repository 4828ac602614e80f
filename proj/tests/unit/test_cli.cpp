#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "lcount/model.hpp"

using namespace lcount;
using namespace lcount::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lcount_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

SynthArgs small_synth(const fs::path& out) {
  SynthArgs a;
  a.n = 6;
  a.config.seed = 13;
  a.out = out;
  return a;
}

}  // namespace

TEST(ParseBox, AcceptsFourNumbers) {
  EXPECT_EQ(parse_box("1,2,30.5,40"), (ExemplarBox{1, 2, 30.5, 40}));
  EXPECT_THROW(parse_box("1,2,3"), std::invalid_argument);
  EXPECT_THROW(parse_box("1,2,3,x"), std::invalid_argument);
  EXPECT_THROW(parse_box("1,2,3,4,5"), std::invalid_argument);
  EXPECT_THROW(parse_box("1,2,3,4abc"), std::invalid_argument);
}

TEST(DefaultOutputDir, UsesEnvironmentRoot) {
  setenv("LCOUNT_OUTPUT_ROOT", "/tmp/lcount_root", 1);
  const fs::path p = default_output_dir("eval");
  EXPECT_EQ(p.parent_path(), fs::path("/tmp/lcount_root"));
  EXPECT_EQ(p.filename().string().rfind("eval-", 0), 0u);
  unsetenv("LCOUNT_OUTPUT_ROOT");
  EXPECT_EQ(default_output_dir("train").parent_path(), fs::path("runs"));
}

TEST(Synth, NonPositiveCountRejected) {
  SynthArgs a = small_synth(scratch("synth_zero"));
  a.n = 0;
  EXPECT_THROW(cmd_synth(a), std::invalid_argument);
}

TEST(Synth, RerunIsByteIdentical) {
  const fs::path a = scratch("synth_a"), b = scratch("synth_b");
  ASSERT_EQ(cmd_synth(small_synth(a)), 0);
  ASSERT_EQ(cmd_synth(small_synth(b)), 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_EQ(files, 6u + 2 + 3);  // images, annotations + manifest, three splits
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Train, MissingSplitReported) {
  const fs::path d = scratch("train_missing");
  ASSERT_EQ(cmd_synth(small_synth(d)), 0);
  fs::remove(d / "splits" / "val.txt");
  TrainArgs t;
  t.data = d;
  t.model = ModelConfig::tiny();
  t.train = TrainConfig::tiny();
  t.out = d / "run";
  try {
    cmd_train(t);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("val.txt"), std::string::npos) << e.what();
  }
  fs::remove_all(d);
}

TEST(Count, DeterministicOutputs) {
  const fs::path d = scratch("count");
  ASSERT_EQ(cmd_synth(small_synth(d)), 0);
  Model model(ModelConfig::tiny());
  save_checkpoint(d / "m.ckpt", model);
  const auto ann = read_annotations(d / "annotations.jsonl");
  CountArgs c;
  c.checkpoint = d / "m.ckpt";
  c.image = d / "images" / ann[0].image_path;
  for (const auto& b : ann[0].boxes) {
    std::ostringstream os;
    os << b.x1 << "," << b.y1 << "," << b.x2 << "," << b.y2;
    c.boxes.push_back(os.str());
  }
  c.out = d / "o1";
  ASSERT_EQ(cmd_count(c), 0);
  c.out = d / "o2";
  ASSERT_EQ(cmd_count(c), 0);
  for (const char* f : {"count.json", "count_map.txt", "match_map.txt", "detection.png", "density.png",
                        "detection_hint.txt", "density_hint.txt"}) {
    ASSERT_TRUE(fs::exists(d / "o1" / f)) << f;
    EXPECT_EQ(slurp(d / "o1" / f), slurp(d / "o2" / f)) << f;
  }
  const auto j = nlohmann::json::parse(slurp(d / "o1" / "count.json"));
  EXPECT_GE(j.at("count").get<double>(), 0.0);
  EXPECT_GE(j.at("branch").get<int>(), 1);

  c.boxes.assign(4, "0,0,4,4");
  EXPECT_THROW(cmd_count(c), std::invalid_argument);
  c.boxes = {"0,0,0,4"};
  EXPECT_THROW(cmd_count(c), std::exception);
  fs::remove_all(d);
}

TEST(Gradcheck, InjectedBugFails) {
  GradcheckArgs g;
  g.seeds = 1;
  g.coords = 2;
  g.inject_bug = true;
  EXPECT_EQ(cmd_gradcheck(g), 1);
}
