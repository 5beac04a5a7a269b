#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "ssv/network.hpp"
#include "ssv/sparsity.hpp"
#include "ssv/trainer.hpp"

namespace ssv {

// JSON run configuration. Sections: features, model, train, prune, eval,
// paths. Unknown keys are rejected; paths.data_dir and paths.out_dir are
// required and resolved against the config file's directory.
struct RunConfig {
  double vad_threshold = kDefaultVadThreshold;
  ModelConfig model;
  TrainConfig train;
  double prune_tau = 1e-3;
  std::size_t fine_tune_epochs = 0;
  std::size_t eval_genuine = 60;
  std::size_t eval_impostor = 240;
  std::uint64_t eval_seed = 1;
  std::size_t dev_utterances = 3;  // per speaker, held out of training
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;

  // Stem for summary rows: the out_dir's name.
  std::string run_id() const;
};

// Throws ConfigError naming the key path ("train.learning_rate") on unknown
// keys, wrong types or out-of-range values.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Name outputs are keyed by: a file name up to its first '.'.
std::string variant_name(const std::filesystem::path& path);

// layer,group,norm,keep,tau
void write_mask_csv(const PruneMask& mask, const GroupNormReport& norms, const std::filesystem::path& path);
PruneMask read_mask_csv(const std::filesystem::path& path);
// layer,direction,position,original
void write_compaction_csv(const CompactionMap& map, const std::filesystem::path& path);

// Each command writes its artifacts, logs progress to `log`, and returns the
// process exit code. Library errors propagate as exceptions.
int cmd_synth(std::size_t speakers, std::size_t utterances, std::uint64_t seed,
              const std::filesystem::path& out, std::ostream& log);
int cmd_extract(const std::filesystem::path& manifest, const std::filesystem::path& out, double vad_threshold,
                std::ostream& log);
int cmd_train(const RunConfig& config, const std::string& variant, std::ostream& log);
int cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
int cmd_prune(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& log);
int cmd_compact(const RunConfig& config, const std::filesystem::path& checkpoint,
                const std::filesystem::path& mask, std::ostream& log);
int cmd_bench(const RunConfig& config, const std::filesystem::path& dense, const std::filesystem::path& compacted,
              std::size_t repeats, std::ostream& log);
int cmd_report(const RunConfig& config, std::ostream& log);

}  // namespace ssv
