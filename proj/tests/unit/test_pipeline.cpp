#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "ssv/audio.hpp"
#include "ssv/csv.hpp"
#include "ssv/errors.hpp"
#include "ssv/pipeline.hpp"
#include "temp_dir.hpp"

using namespace ssv;
using ssv::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SSV_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

// 4 speakers x 6 utterances, synthesized and extracted once per process.
const TempDir& corpus() {
  static TempDir dir;
  static const bool ready = [] {
    const fs::path log = dir / "setup.log";
    return run("synth --speakers 4 --utts 6 --seed 5 --out '" + (dir / "wav").string() + "'", log) == 0 &&
           run("extract --manifest '" + (dir / "wav/manifest.csv").string() + "' --out '" +
                   (dir / "feat").string() + "'",
               log) == 0;
  }();
  EXPECT_TRUE(ready);
  return dir;
}

std::string small_config(const fs::path& data, const fs::path& out, const std::string& train_extra = "",
                         const std::string& prune = R"({"tau": 1e-3})") {
  return R"({"model": {"conv_widths": [4, 4, 4], "seed": 3},
  "train": {"epochs": 2, "batch_size": 8, "learning_rate": 0.003, "lambda_gs": 0.1)" +
         train_extra + R"(},
  "prune": )" + prune + R"(,
  "eval": {"n_genuine": 8, "n_impostor": 16, "seed": 2, "dev_utterances": 3},
  "paths": {"data_dir": ")" + data.string() + R"(", "out_dir": ")" + out.string() + R"("}})";
}

}  // namespace

TEST(Synth, WritesTreeAndManifest) {
  TempDir t;
  ASSERT_EQ(run("synth --speakers 2 --utts 2 --seed 9 --out '" + (t / "a").string() + "'", t / "log"), 0);
  EXPECT_EQ(count_ext(t / "a", ".wav"), 4u);
  const CsvTable m = read_csv(t / "a/manifest.csv");
  EXPECT_EQ(m.header, (std::vector<std::string>{"speaker_id", "utt_id", "path"}));
  ASSERT_EQ(m.rows.size(), 4u);
  for (const auto& row : m.rows) EXPECT_TRUE(fs::exists(t / "a" / row[2]));

  ASSERT_EQ(run("synth --speakers 2 --utts 2 --seed 9 --out '" + (t / "b").string() + "'", t / "log"), 0);
  for (const auto& row : m.rows) EXPECT_EQ(slurp(t / "a" / row[2]), slurp(t / "b" / row[2]));
  EXPECT_EQ(slurp(t / "a/manifest.csv"), slurp(t / "b/manifest.csv"));
}

TEST(Synth, ManifestRowCountIsProduct) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(1, 10);
  for (int trial = 0; trial < 3; ++trial) {
    TempDir t;
    const std::size_t n = pick(rng), m = pick(rng);
    ASSERT_EQ(run("synth --speakers " + std::to_string(n) + " --utts " + std::to_string(m) + " --out '" +
                      t.path().string() + "/w'",
                  t / "log"),
              0);
    EXPECT_EQ(read_csv(t / "w/manifest.csv").rows.size(), n * m);
  }
}

TEST(Extract, OneFeatureFilePerRowMatchingLibrary) {
  const TempDir& c = corpus();
  EXPECT_EQ(count_ext(c / "feat", ".fcub"), 24u);
  const CsvTable errors = read_csv(c / "feat/errors.csv");
  EXPECT_TRUE(errors.rows.empty());
  const FeatureCube expected = feature_cube(load_wav(c / "wav/spk002/spk002_u004.wav"));
  EXPECT_EQ(load_feature_file(c / "feat/spk002/spk002_u004.fcub"), expected);
}

TEST(Extract, CorruptWavIsReportedAndOthersSurvive) {
  TempDir t;
  ASSERT_EQ(run("synth --speakers 1 --utts 3 --seed 2 --out '" + (t / "w").string() + "'", t / "log"), 0);
  write_text(t / "w/spk000/spk000_u001.wav", "RIFF garbage");
  EXPECT_EQ(run("extract --manifest '" + (t / "w/manifest.csv").string() + "' --out '" + (t / "f").string() + "'",
                t / "log"),
            1);
  const CsvTable errors = read_csv(t / "f/errors.csv");
  ASSERT_EQ(errors.rows.size(), 1u);
  EXPECT_EQ(errors.rows[0][1], "spk000_u001");
  EXPECT_EQ(count_ext(t / "f", ".fcub"), 2u);
  EXPECT_EQ(read_csv(t / "f/features.csv").rows.size(), 2u);
}

TEST(Config, DefaultsAndResolution) {
  TempDir t;
  fs::create_directories(t / "data");
  const RunConfig c = parse_run_config(R"({"paths": {"data_dir": "data", "out_dir": "runs/r1"}})", t.path());
  EXPECT_EQ(c.data_dir, t / "data");
  EXPECT_EQ(c.run_id(), "r1");
  EXPECT_EQ(c.model.conv_widths, ModelConfig{}.conv_widths);
  EXPECT_DOUBLE_EQ(c.train.prune_tau, c.prune_tau);
}

TEST(Config, ErrorsNameTheKeyPath) {
  TempDir t;
  fs::create_directories(t / "data");
  auto message = [&](const std::string& json) {
    try {
      parse_run_config(json, t.path());
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string paths = R"("paths": {"data_dir": "data", "out_dir": "o"})";
  EXPECT_NE(message(R"({"train": {"learning_rat": 0.1}, )" + paths + "}").find("train.learning_rat"), std::string::npos);
  EXPECT_NE(message(R"({"model": {"conv_widths": [4, -1]}, )" + paths + "}").find("model.conv_widths[1]"),
            std::string::npos);
  EXPECT_NE(message(R"({"eval": {"n_genuine": "ten"}, )" + paths + "}").find("eval.n_genuine"), std::string::npos);
  EXPECT_NE(message(R"({"prune": {"tau": -1}, )" + paths + "}").find("prune.tau"), std::string::npos);
  EXPECT_NE(message(R"({"extra": {}, )" + paths + "}").find("extra"), std::string::npos);
  EXPECT_NE(message("{}").find("paths"), std::string::npos);
  EXPECT_NE(message(R"({"paths": {"data_dir": "missing", "out_dir": "o"}})").find("paths.data_dir"), std::string::npos);
  EXPECT_NE(message("{not json").find("JSON"), std::string::npos);

  write_text(t / "bad.json", R"({"train": {"epochz": 1}, )" + paths + "}");
  EXPECT_EQ(run("train --config '" + (t / "bad.json").string() + "'", t / "log"), 1);
  EXPECT_NE(slurp(t / "log").find("train.epochz"), std::string::npos);
  EXPECT_EQ(run("train", t / "log"), 2);
}

TEST(MaskCsv, RoundTripAndVariantName) {
  TempDir t;
  const GroupNormReport norms{{0, {0.5, 2.0, 0.01}}, {3, {1.0, 0.0}}};
  const PruneMask mask = prune_mask(norms, 0.1);
  write_mask_csv(mask, norms, t / "m.mask.csv");
  const PruneMask back = read_mask_csv(t / "m.mask.csv");
  EXPECT_DOUBLE_EQ(back.tau, 0.1);
  ASSERT_EQ(back.layers.size(), 2u);
  EXPECT_EQ(back.layers[0].keep, (std::vector<bool>{true, true, false}));
  EXPECT_EQ(back.layers[1].layer, 3u);
  EXPECT_EQ(back.layers[1].keep, (std::vector<bool>{true, false}));
  EXPECT_EQ(variant_name("dir/ssl-pruned.mask.csv"), "ssl-pruned");
}

TEST(Pipeline, ZeroLearningRateKeepsInitialEer) {
  const TempDir& c = corpus();
  TempDir t;
  write_text(t / "run.json", small_config(c / "feat", t / "out", R"(, "momentum": 0.0)"));
  std::string cfg = slurp(t / "run.json");
  cfg.replace(cfg.find("0.003"), 5, "0");
  write_text(t / "run.json", cfg);
  const RunConfig rc = load_run_config(t / "run.json");
  fs::create_directories(rc.out_dir);
  save_checkpoint(build_model(rc.model), rc.out_dir / "init.ssvw");

  const std::string conf = "--config '" + (t / "run.json").string() + "'";
  ASSERT_EQ(run("train " + conf + " --variant trained", t / "log"), 0) << slurp(t / "log");
  ASSERT_EQ(run("eval " + conf + " --checkpoint '" + (rc.out_dir / "trained.ssvw").string() + "'", t / "log"), 0);
  ASSERT_EQ(run("eval " + conf + " --checkpoint '" + (rc.out_dir / "init.ssvw").string() + "'", t / "log"), 0);
  EXPECT_EQ(slurp(rc.out_dir / "trained.report.csv"), slurp(rc.out_dir / "init.report.csv"));
  EXPECT_EQ(slurp(rc.out_dir / "trained.scores.csv"), slurp(rc.out_dir / "init.scores.csv"));
}

TEST(Pipeline, ZeroTauCompactionKeepsShapes) {
  const TempDir& c = corpus();
  TempDir t;
  write_text(t / "run.json", small_config(c / "feat", t / "out", "", R"({"tau": 0})"));
  const RunConfig rc = load_run_config(t / "run.json");
  const Model model = build_model(rc.model);
  fs::create_directories(rc.out_dir);
  save_checkpoint(model, rc.out_dir / "m.ssvw");

  const std::string conf = "--config '" + (t / "run.json").string() + "'";
  ASSERT_EQ(run("prune " + conf + " --checkpoint '" + (rc.out_dir / "m.ssvw").string() + "'", t / "log"), 0);
  ASSERT_EQ(run("compact " + conf + " --checkpoint '" + (rc.out_dir / "m-pruned.ssvw").string() + "' --mask '" +
                    (rc.out_dir / "m.mask.csv").string() + "'",
                t / "log"),
            0);
  const Model out = load_checkpoint(rc.out_dir / "m-pruned-compact.ssvw");
  ASSERT_EQ(out.layers().size(), model.layers().size());
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    EXPECT_EQ(out.layers()[i].weights.shape(), model.layers()[i].weights.shape());
    EXPECT_EQ(out.layers()[i].bias.shape(), model.layers()[i].bias.shape());
  }
}

TEST(Pipeline, FullRunIsRepeatableAndSummarized) {
  const TempDir& c = corpus();
  TempDir t;
  std::vector<fs::path> outs;
  for (const std::string run_name : {"r1", "r2"}) {
    const fs::path cfg = t / (run_name + ".json");
    write_text(cfg, small_config(c / "feat", t / run_name, "", R"({"tau": 0.05, "fine_tune_epochs": 1})"));
    const std::string conf = "--config '" + cfg.string() + "'";
    const fs::path out = t / run_name;
    ASSERT_EQ(run("train " + conf + " --variant ssl", t / "log"), 0) << slurp(t / "log");
    ASSERT_EQ(run("eval " + conf + " --checkpoint '" + (out / "ssl.ssvw").string() + "'", t / "log"), 0);
    ASSERT_EQ(run("prune " + conf + " --checkpoint '" + (out / "ssl.ssvw").string() + "'", t / "log"), 0);
    ASSERT_EQ(run("compact " + conf + " --checkpoint '" + (out / "ssl-pruned.ssvw").string() + "' --mask '" +
                      (out / "ssl.mask.csv").string() + "'",
                  t / "log"),
              0);
    ASSERT_EQ(run("eval " + conf + " --checkpoint '" + (out / "ssl-pruned-compact.ssvw").string() + "'", t / "log"),
              0);
    ASSERT_EQ(run("report " + conf, t / "log"), 0);
    outs.push_back(out);
  }
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(outs[0])) {
    const fs::path other = outs[1] / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    if (e.path().filename() == "summary.csv") continue;  // carries the run id
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++compared;
  }
  EXPECT_EQ(compared, 14u);

  const CsvTable summary = read_csv(outs[0] / "summary.csv");
  EXPECT_EQ(summary.header,
            (std::vector<std::string>{"run_id", "model_variant", "eer", "sparsity_fraction", "mean_speedup"}));
  ASSERT_EQ(summary.rows.size(), 2u);
  EXPECT_EQ(summary.rows[0][0], "r1");
  EXPECT_EQ(summary.rows[0][1], "ssl-pruned-compact");
  EXPECT_EQ(summary.rows[1][1], "ssl");
  EXPECT_EQ(summary.rows[1][4], "");
}
