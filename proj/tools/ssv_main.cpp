#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ssv/errors.hpp"
#include "ssv/pipeline.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Sparse Siamese speaker verification toolkit"};
  app.require_subcommand(1);

  std::size_t speakers = 20, utterances = 10;
  std::uint64_t seed = 2024;
  fs::path out, manifest, config, checkpoint, mask, dense, compacted;
  double vad = ssv::kDefaultVadThreshold;
  std::string variant = "model";
  std::size_t repeats = 25;

  auto* synth = app.add_subcommand("synth", "write a synthetic WAV corpus and manifest.csv");
  synth->add_option("--speakers", speakers)->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  synth->add_option("--utts,--utterances", utterances)->check(CLI::Range(std::size_t{1}, std::size_t{10000}));
  synth->add_option("--seed", seed);
  synth->add_option("--out", out)->required();

  auto* extract = app.add_subcommand("extract", "compute feature cubes for a WAV manifest");
  extract->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  extract->add_option("--out", out)->required();
  extract->add_option("--vad-threshold", vad);

  auto with_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config)->required()->check(CLI::ExistingFile);
  };
  auto* train = app.add_subcommand("train", "train a model from a run config");
  with_config(train);
  train->add_option("--variant", variant, "output name stem")->capture_default_str();

  auto* eval = app.add_subcommand("eval", "score dev trials and write EER and DET outputs");
  with_config(eval);
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* prune = app.add_subcommand("prune", "threshold group norms, mask and optionally fine-tune");
  with_config(prune);
  prune->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* compact = app.add_subcommand("compact", "physically remove masked groups");
  with_config(compact);
  compact->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  compact->add_option("--mask", mask)->required()->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "time dense and compacted layers");
  with_config(bench);
  bench->add_option("--dense", dense)->required()->check(CLI::ExistingFile);
  bench->add_option("--compact", compacted)->required()->check(CLI::ExistingFile);
  bench->add_option("--repeats", repeats);

  auto* report = app.add_subcommand("report", "summarize all reports in the output directory");
  with_config(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return ssv::cmd_synth(speakers, utterances, seed, out, std::cout);
    if (extract->parsed()) return ssv::cmd_extract(manifest, out, vad, std::cout);
    const ssv::RunConfig cfg = ssv::load_run_config(config);
    if (train->parsed()) return ssv::cmd_train(cfg, variant, std::cout);
    if (eval->parsed()) return ssv::cmd_eval(cfg, checkpoint, std::cout);
    if (prune->parsed()) return ssv::cmd_prune(cfg, checkpoint, std::cout);
    if (compact->parsed()) return ssv::cmd_compact(cfg, checkpoint, mask, std::cout);
    if (bench->parsed()) return ssv::cmd_bench(cfg, dense, compacted, repeats, std::cout);
    if (report->parsed()) return ssv::cmd_report(cfg, std::cout);
  } catch (const ssv::Error& e) {
    std::cerr << "ssv: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ssv: error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
