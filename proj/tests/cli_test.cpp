#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "poseuq/dataset.hpp"

namespace poseuq {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "poseuq");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "poseuq_cli_test");
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    ScenarioConfig cfg = default_scenario();
    cfg.n_sequences = 4;
    cfg.frames_per_sequence = 15;
    write_file_atomic(path("small.json"), to_json(cfg).dump(2));
    ASSERT_EQ(run({"gen", "--config", path("small.json"), "--out", path("small.jsonl")}).code, 0);
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string busiest_object() {
    std::map<std::string, int> count;
    for (const auto& r : load_dataset(path("small.jsonl")).records) ++count[r.object_id];
    return std::max_element(count.begin(), count.end(),
                            [](const auto& a, const auto& b) { return a.second < b.second; })
        ->first;
  }
  static fs::path* dir_;
};
fs::path* Cli::dir_ = nullptr;

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitValidation);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"gen"}).code, cli::kExitValidation);
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, cli::kExitOk);
  for (const char* cmd : {"gen", "train-metric", "eval-corr", "select-view"}) {
    EXPECT_NE(help.out.find(cmd), std::string::npos) << cmd;
  }
}

TEST_F(Cli, GenTinyConfig) {
  ScenarioConfig cfg = default_scenario();
  cfg.n_sequences = 1;
  cfg.frames_per_sequence = 3;
  cfg.objects.resize(1);
  cfg.min_objects = 1;
  cfg.max_objects = 1;
  cfg.estimators.resize(2);
  write_file_atomic(path("tiny.json"), to_json(cfg).dump(2));
  const auto r = run({"gen", "--config", path("tiny.json"), "--out", path("tiny.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("records: 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("detection rate ndds_dope_full"), std::string::npos) << r.out;
  const std::string text = read_file(path("tiny.jsonl"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST_F(Cli, GenIsByteDeterministic) {
  ASSERT_EQ(run({"gen", "--config", path("small.json"), "--out", path("again.jsonl")}).code, 0);
  EXPECT_EQ(read_file(path("again.jsonl")), read_file(path("small.jsonl")));
  ASSERT_EQ(run({"gen", "--config", path("small.json"), "--out", path("seed7.jsonl"), "--seed",
                 "7", "--threads", "2"})
                .code,
            0);
  EXPECT_NE(read_file(path("seed7.jsonl")), read_file(path("small.jsonl")));
  EXPECT_EQ(load_dataset(path("seed7.jsonl")).scenario.seed, 7u);
}

TEST_F(Cli, GenErrors) {
  Json bad = to_json(default_scenario());
  bad["estimators"][1]["sigma_h"] = -1.0;
  write_file_atomic(path("bad.json"), bad.dump());
  auto r = run({"gen", "--config", path("bad.json"), "--out", path("x.jsonl")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("estimators[1].sigma_h"), std::string::npos) << r.err;

  r = run({"gen", "--config", path("missing.json"), "--out", path("x.jsonl")});
  EXPECT_EQ(r.code, cli::kExitIo);
  r = run({"gen", "--config", path("small.json"), "--out", path("no/such/dir/x.jsonl")});
  EXPECT_EQ(r.code, cli::kExitIo);
}

TEST_F(Cli, TrainMetric) {
  const std::string obj = busiest_object();
  const std::vector<std::string> args{"train-metric", "--data",   path("small.jsonl"),
                                      "--object",     obj,        "--estimator",
                                      "ndds_dope",    "--epochs", "30",
                                      "--out",        path("m.json")};
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("held-out loss"), std::string::npos);
  const auto file = load_learned_metric(path("m.json"));
  EXPECT_LE(file.final_loss, file.initial_loss);
  EXPECT_EQ(file.params.object_id, obj);

  auto again = args;
  again.back() = path("m2.json");
  ASSERT_EQ(run(again).code, 0);
  EXPECT_EQ(read_file(path("m2.json")), read_file(path("m.json")));
}

TEST_F(Cli, TrainMetricZeroLearningRate) {
  const std::string obj = busiest_object();
  ASSERT_EQ(run({"train-metric", "--data", path("small.jsonl"), "--object", obj, "--estimator",
                 "ndds_dope", "--epochs", "3", "--lr", "0", "--seed", "4", "--out",
                 path("lr0.json")})
                .code,
            0);
  const auto file = load_learned_metric(path("lr0.json"));
  EXPECT_EQ(file.final_loss, file.initial_loss);
  const auto init = LearnedMetricParams::initialize(4);
  for (std::size_t l = 0; l + 1 < init.layers.size(); ++l) {
    EXPECT_EQ(file.params.layers[l], init.layers[l]);
  }
}

TEST_F(Cli, TrainMetricErrors) {
  const std::string obj = busiest_object();
  auto r = run({"train-metric", "--data", path("small.jsonl"), "--object", obj, "--estimator",
                "visii_dope", "--out", path("e.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  r = run({"train-metric", "--data", path("small.jsonl"), "--object", "nothing_here",
           "--estimator", "ndds_dope", "--out", path("e.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("usable frames"), std::string::npos) << r.err;
  r = run({"train-metric", "--data", path("small.jsonl"), "--object", obj, "--estimator",
           "ndds_dope", "--normalization", "magic", "--out", path("e.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  r = run({"train-metric", "--data", path("absent.jsonl"), "--object", obj, "--estimator",
           "ndds_dope", "--out", path("e.json")});
  EXPECT_EQ(r.code, cli::kExitIo);
}

TEST_F(Cli, EvalCorr) {
  const auto r = run({"eval-corr", "--data", path("small.jsonl"), "--methods",
                      "confidence,d_add", "--out", path("c.json"), "--text-out", path("c.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(read_file(path("c.json")));
  EXPECT_EQ(j.at("rows").size(), 4u);
  EXPECT_EQ(read_file(path("c.txt")), r.out);
  EXPECT_NE(r.out.find("d_add"), std::string::npos);
}

TEST_F(Cli, EvalCorrErrors) {
  auto r = run({"eval-corr", "--data", path("small.jsonl"), "--methods", "d_add,d_bogus",
                "--out", path("c.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("d_bogus"), std::string::npos) << r.err;
  r = run({"eval-corr", "--data", path("small.jsonl"), "--methods", "d_learned", "--out",
           path("c.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
}

TEST_F(Cli, EvalCorrWithLearnedParams) {
  const std::string obj = busiest_object();
  ASSERT_EQ(run({"train-metric", "--data", path("small.jsonl"), "--object", obj, "--estimator",
                 "ndds_dope", "--epochs", "5", "--out", path("l.json")})
                .code,
            0);
  const auto r = run({"eval-corr", "--data", path("small.jsonl"), "--methods", "d_learned",
                      "--estimators", "ndds_dope", "--learned-params", path("l.json"),
                      "--heldout-only", "--out", path("cl.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(read_file(path("cl.json")));
  ASSERT_EQ(j.at("rows").size(), 1u);
  const auto& objects = j["rows"][0]["objects"];
  ASSERT_EQ(objects.size(), 1u);
  const auto file = load_learned_metric(path("l.json"));
  // Held-out frames exclude every training frame.
  const auto ds = load_dataset(path("small.jsonl"));
  std::size_t usable = 0;
  for (const auto& rec : ds.records) {
    if (rec.object_id == obj && rec.estimates[0].detected() && rec.estimates[1].detected()) {
      ++usable;
    }
  }
  EXPECT_EQ(objects[0]["n_frames"].get<std::size_t>(), usable - file.training_frames.size());
}

TEST_F(Cli, SelectView) {
  auto r = run({"select-view", "--data", path("small.jsonl"), "--method", "oracle", "--out",
                path("s0.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"select-view", "--data", path("small.jsonl"), "--method", "d_add,confidence", "--out",
           path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(read_file(path("s.json")));
  const Json* oracle = nullptr;
  for (const auto& row : j.at("rows")) {
    if (row.at("method") == "oracle") oracle = &row;
  }
  ASSERT_NE(oracle, nullptr);
  for (const auto& row : j.at("rows")) {
    ASSERT_EQ(row.at("selections").size(), oracle->at("selections").size());
    for (std::size_t i = 0; i < row.at("selections").size(); ++i) {
      EXPECT_LE(oracle->at("selections")[i].at("add_error").get<double>(),
                row.at("selections")[i].at("add_error").get<double>());
    }
  }
  r = run({"select-view", "--data", path("small.jsonl"), "--method", "nonsense", "--out",
           path("s.json")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("nonsense"), std::string::npos);
}

}  // namespace
}  // namespace poseuq
