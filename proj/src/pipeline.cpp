#include "ssv/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ssv/csv.hpp"
#include "ssv/dataset.hpp"
#include "ssv/errors.hpp"
#include "ssv/eval.hpp"
#include "ssv/synth.hpp"

namespace ssv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads keys from one JSON object; finish() rejects any key never asked for.
class Section {
 public:
  Section(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw ConfigError(name + ": expected an object");
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
    return v->get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_array()) throw ConfigError(path(key) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_unsigned())
        throw ConfigError(path(key) + "[" + std::to_string(i) + "]: expected a non-negative integer");
      out.push_back((*v)[i].get<std::size_t>());
    }
    return out;
  }

  std::string text(const std::string& key) {
    const json* v = find(key);
    if (!v) throw ConfigError(path(key) + ": required key is missing");
    if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items())
      if (!asked_.count(key)) throw ConfigError(path(key) + ": unknown key");
  }

  std::string path(const std::string& key) const { return name_ + "." + key; }

 private:
  const json* find(const std::string& key) {
    asked_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> asked_;
};

template <class F>
void check(bool ok, const std::string& key, F&& message) {
  if (!ok) throw ConfigError(key + ": " + message());
}

}  // namespace

std::string RunConfig::run_id() const {
  const fs::path p = out_dir.lexically_normal();
  return (p.has_filename() ? p.filename() : p.parent_path().filename()).string();
}

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections{"features", "model", "train", "prune", "eval", "paths"};
  for (const auto& [key, value] : root.items())
    if (!sections.count(key)) throw ConfigError(key + ": unknown section");

  RunConfig c;
  Section features(root, "features");
  c.vad_threshold = features.number("vad_threshold", c.vad_threshold);
  check(c.vad_threshold > 0.0 && c.vad_threshold < 1.0, features.path("vad_threshold"),
        [] { return "must be in (0, 1)"; });
  features.finish();

  Section model(root, "model");
  c.model.conv_widths = model.counts("conv_widths", c.model.conv_widths);
  c.model.embedding_dim = model.count("embedding_dim", c.model.embedding_dim);
  c.model.seed = model.count("seed", c.model.seed);
  check(!c.model.conv_widths.empty(), model.path("conv_widths"), [] { return "must not be empty"; });
  for (std::size_t w : c.model.conv_widths)
    check(w > 0 && w <= 4096, model.path("conv_widths"), [] { return "entries must be in [1, 4096]"; });
  check(c.model.embedding_dim == kEmbeddingDim, model.path("embedding_dim"),
        [] { return "must be " + std::to_string(kEmbeddingDim); });
  model.finish();

  Section prune(root, "prune");
  c.prune_tau = prune.number("tau", c.prune_tau);
  c.fine_tune_epochs = prune.count("fine_tune_epochs", c.fine_tune_epochs);
  check(c.prune_tau >= 0.0, prune.path("tau"), [] { return "must be >= 0"; });
  prune.finish();

  Section train(root, "train");
  TrainConfig& t = c.train;
  t.epochs = train.count("epochs", t.epochs);
  t.batch_size = train.count("batch_size", t.batch_size);
  t.steps_per_epoch = train.count("steps_per_epoch", t.steps_per_epoch);
  t.learning_rate = train.number("learning_rate", t.learning_rate);
  t.momentum = train.number("momentum", t.momentum);
  t.genuine_ratio = train.number("genuine_ratio", t.genuine_ratio);
  t.seed = train.count("seed", t.seed);
  t.hyperparams.lambda_r = train.number("lambda_r", t.hyperparams.lambda_r);
  t.hyperparams.lambda_gs = train.number("lambda_gs", t.hyperparams.lambda_gs);
  t.hyperparams.eta = train.number("eta", t.hyperparams.eta);
  t.eval_every = train.count("eval_every", t.eval_every);
  t.prune_tau = c.prune_tau;
  train.finish();
  t.validate();

  Section eval(root, "eval");
  c.eval_genuine = eval.count("n_genuine", c.eval_genuine);
  c.eval_impostor = eval.count("n_impostor", c.eval_impostor);
  c.eval_seed = eval.count("seed", c.eval_seed);
  c.dev_utterances = eval.count("dev_utterances", c.dev_utterances);
  check(c.eval_genuine > 0, eval.path("n_genuine"), [] { return "must be >= 1"; });
  check(c.eval_impostor > 0, eval.path("n_impostor"), [] { return "must be >= 1"; });
  check(c.dev_utterances >= 2, eval.path("dev_utterances"), [] { return "must be >= 2 to form genuine trials"; });
  eval.finish();

  if (!root.contains("paths")) throw ConfigError("paths: required section is missing");
  Section paths(root, "paths");
  c.data_dir = base_dir / paths.text("data_dir");
  c.out_dir = base_dir / paths.text("out_dir");
  paths.finish();
  check(fs::is_directory(c.data_dir), paths.path("data_dir"),
        [&] { return "directory " + c.data_dir.string() + " does not exist"; });
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string variant_name(const fs::path& path) {
  const std::string name = path.filename().string();
  return name.substr(0, name.find('.'));
}

void write_mask_csv(const PruneMask& mask, const GroupNormReport& norms, const fs::path& path) {
  if (norms.size() != mask.layers.size()) throw ShapeError("mask and norm report cover different layers");
  CsvWriter csv(path, {"layer", "group", "norm", "keep", "tau"});
  for (std::size_t r = 0; r < mask.layers.size(); ++r)
    for (std::size_t g = 0; g < mask.layers[r].keep.size(); ++g)
      csv.row({mask.layers[r].layer, g, norms[r].norms.at(g), mask.layers[r].keep[g] ? 1 : 0, mask.tau});
  csv.close();
}

PruneMask read_mask_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t layer = t.column("layer"), group = t.column("group"), keep = t.column("keep"),
                    tau = t.column("tau");
  PruneMask mask;
  for (const auto& row : t.rows) {
    const std::size_t l = parse_uint(row[layer], "mask layer");
    const std::size_t g = parse_uint(row[group], "mask group");
    const std::uint64_t k = parse_uint(row[keep], "mask keep");
    if (k > 1) throw FormatError(path.string() + ": keep must be 0 or 1");
    mask.tau = parse_double(row[tau], "mask tau");
    if (mask.layers.empty() || mask.layers.back().layer != l) mask.layers.push_back({l, {}});
    if (g != mask.layers.back().keep.size())
      throw FormatError(path.string() + ": groups of layer " + std::to_string(l) + " are not listed in order");
    mask.layers.back().keep.push_back(k == 1);
  }
  if (mask.layers.empty()) throw FormatError(path.string() + ": empty mask");
  return mask;
}

void write_compaction_csv(const CompactionMap& map, const fs::path& path) {
  CsvWriter csv(path, {"layer", "direction", "position", "original"});
  for (const LayerCompaction& l : map) {
    for (std::size_t i = 0; i < l.kept_outputs.size(); ++i) csv.row({l.layer, "output", i, l.kept_outputs[i]});
    for (std::size_t i = 0; i < l.kept_inputs.size(); ++i) csv.row({l.layer, "input", i, l.kept_inputs[i]});
  }
  csv.close();
}

// --- commands -----------------------------------------------------------------

int cmd_synth(std::size_t speakers, std::size_t utterances, std::uint64_t seed, const fs::path& out,
              std::ostream& log) {
  if (speakers < 1 || utterances < 1) throw ConfigError("synth needs at least one speaker and one utterance");
  const SynthDataset data = synth_dataset(speakers, utterances, seed);
  fs::create_directories(out);
  CsvWriter manifest(out / "manifest.csv", {"speaker_id", "utt_id", "path"});
  for (std::size_t s = 0; s < speakers; ++s) {
    const std::string spk = synth_speaker_id(s);
    fs::create_directories(out / spk);
    for (std::size_t u = 0; u < utterances; ++u) {
      const std::string rel = spk + "/" + synth_utterance_id(s, u) + ".wav";
      save_wav(data.utterances[s][u], out / rel);
      manifest.row({spk, synth_utterance_id(s, u), rel});
    }
  }
  manifest.close();
  log << "synth: wrote " << speakers * utterances << " clips to " << out.string() << "\n";
  return 0;
}

int cmd_extract(const fs::path& manifest, const fs::path& out, double vad_threshold, std::ostream& log) {
  if (!(vad_threshold > 0.0 && vad_threshold < 1.0)) throw ConfigError("vad threshold must be in (0, 1)");
  const CsvTable rows = read_csv(manifest);
  const std::size_t spk = rows.column("speaker_id"), utt = rows.column("utt_id"), col = rows.column("path");
  const fs::path base = manifest.parent_path();
  fs::create_directories(out);
  CsvWriter features(out / kFeatureManifest, {"speaker_id", "utt_id", "path"});
  CsvWriter errors(out / "errors.csv", {"speaker_id", "utt_id", "path", "error"});
  std::size_t ok = 0, failed = 0;
  for (const auto& row : rows.rows) {
    try {
      const FeatureCube cube = feature_cube(load_wav(base / row[col]), vad_threshold);
      const std::string rel = row[spk] + "/" + row[utt] + ".fcub";
      fs::create_directories(out / row[spk]);
      save_feature_file(cube, out / rel);
      features.row({row[spk], row[utt], rel});
      ++ok;
    } catch (const Error& e) {
      errors.row({row[spk], row[utt], row[col], e.what()});
      log << "extract: " << row[col] << ": " << e.what() << "\n";
      ++failed;
    }
  }
  features.close();
  errors.close();
  log << "extract: " << ok << " feature files, " << failed << " errors\n";
  return failed ? 1 : 0;
}

namespace {

struct Experiment {
  DatasetSplit split;
  TrialSet trials;
};

Experiment load_experiment(const RunConfig& c) {
  Experiment e{split_dataset(load_dataset(c.data_dir), c.dev_utterances), {}};
  e.trials = make_trials(e.split.dev, c.eval_genuine, c.eval_impostor, c.eval_seed);
  return e;
}

EpochCallback epoch_logger(std::ostream& log, const std::string& what, std::size_t epochs) {
  return [&log, what, epochs](const EpochLog& e) {
    log << what << ": epoch " << e.epoch << "/" << epochs << " loss " << format_number(e.total_loss)
        << " data " << format_number(e.data_loss) << " sparsity " << format_number(e.sparsity_fraction);
    if (e.dev_eer) log << " dev_eer " << format_number(*e.dev_eer);
    log << "\n";
  };
}

fs::path output(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return c.out_dir / name;
}

}  // namespace

int cmd_train(const RunConfig& config, const std::string& variant, std::ostream& log) {
  if (variant.empty() || variant.find_first_of("./\\") != std::string::npos)
    throw ConfigError("variant name '" + variant + "' must be non-empty without '.', '/' or '\\'");
  const Experiment ex = load_experiment(config);
  const DevSet dev{&ex.split.dev, ex.trials};
  log << "train: " << ex.split.train.size() << " training and " << ex.split.dev.size()
      << " dev utterances, " << config.train.steps_for(ex.split.train) << " steps per epoch\n";
  const TrainResult r = train(build_model(config.model), ex.split.train, config.train, &dev,
                              epoch_logger(log, "train", config.train.epochs));
  save_checkpoint(r.model, output(config, variant + ".ssvw"));
  write_train_log_csv(r.log, output(config, variant + ".train_log.csv"));
  log << "train: wrote " << (config.out_dir / (variant + ".ssvw")).string() << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config, const fs::path& checkpoint, std::ostream& log) {
  const Model model = load_checkpoint(checkpoint);
  const Experiment ex = load_experiment(config);
  const EvalReport r = evaluate(model, ex.split.dev, ex.trials);
  const std::string v = variant_name(checkpoint);
  write_scores_csv(ex.trials, r.distances, output(config, v + ".scores.csv"));
  write_report_csv(r, output(config, v + ".report.csv"),
                   {{"sparsity_fraction", sparsity_stats(model, config.prune_tau).fraction()},
                    {"parameters", static_cast<double>(model.parameter_count())}});
  write_det_csv(r.det, output(config, v + ".det.csv"));
  log << "eval: " << v << " eer " << format_number(r.eer) << " over " << r.genuine.size() << " genuine and "
      << r.impostor.size() << " impostor trials\n";
  return 0;
}

int cmd_prune(const RunConfig& config, const fs::path& checkpoint, std::ostream& log) {
  const Model model = load_checkpoint(checkpoint);
  const std::string v = variant_name(checkpoint);
  const GroupNormReport norms = group_norms(model);
  const PruneMask mask = prune_mask(norms, config.prune_tau, PruneScope::KeepEmbedding);
  write_group_norms_csv(norms, output(config, v + ".group_norms.csv"));
  write_mask_csv(mask, norms, output(config, v + ".mask.csv"));
  for (const LayerMask& lm : mask.layers)
    log << "prune: layer " << lm.layer << " keeps " << lm.kept() << "/" << lm.keep.size() << " groups\n";

  Model pruned = apply_mask(model, mask);
  if (config.fine_tune_epochs > 0) {
    const Experiment ex = load_experiment(config);
    const DevSet dev{&ex.split.dev, ex.trials};
    TrainConfig ft = config.train;
    ft.epochs = config.fine_tune_epochs;
    TrainResult r = fine_tune(std::move(pruned), mask, ex.split.train, ft, &dev, epoch_logger(log, "fine-tune", ft.epochs));
    write_train_log_csv(r.log, output(config, v + "-pruned.train_log.csv"));
    pruned = std::move(r.model);
  }
  save_checkpoint(pruned, output(config, v + "-pruned.ssvw"));
  log << "prune: wrote " << (config.out_dir / (v + "-pruned.ssvw")).string() << "\n";
  return 0;
}

int cmd_compact(const RunConfig& config, const fs::path& checkpoint, const fs::path& mask_path, std::ostream& log) {
  const Model model = load_checkpoint(checkpoint);
  const auto [compacted, map] = compact(model, read_mask_csv(mask_path));
  const std::string v = variant_name(checkpoint) + "-compact";
  save_checkpoint(compacted, output(config, v + ".ssvw"));
  write_compaction_csv(map, output(config, v + ".map.csv"));
  log << "compact: " << model.parameter_count() << " -> " << compacted.parameter_count() << " parameters, wrote "
      << (config.out_dir / (v + ".ssvw")).string() << "\n";
  return 0;
}

int cmd_bench(const RunConfig& config, const fs::path& dense, const fs::path& compacted, std::size_t repeats,
              std::ostream& log) {
  const Model d = load_checkpoint(dense), c = load_checkpoint(compacted);
  const std::vector<BenchEntry> entries =
      bench_models(d, c, {d.in_channels(), kFreqBins, kCubeFrames}, repeats);
  const std::string v = variant_name(compacted);
  write_bench_csv(entries, output(config, v + ".bench.csv"));
  for (const BenchEntry& e : entries)
    log << "bench: layer " << e.layer << " dense " << format_number(e.dense_ns) << " ns, compact "
        << format_number(e.compact_ns) << " ns, speedup " << format_number(e.speedup) << "\n";
  return 0;
}

int cmd_report(const RunConfig& config, std::ostream& log) {
  if (!fs::is_directory(config.out_dir)) throw ConfigError("paths.out_dir: " + config.out_dir.string() + " does not exist");
  std::vector<fs::path> reports;
  for (const auto& entry : fs::directory_iterator(config.out_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".report.csv";
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
      reports.push_back(entry.path());
  }
  std::sort(reports.begin(), reports.end());
  if (reports.empty()) throw ContractError("report: no *.report.csv files in " + config.out_dir.string());

  CsvWriter summary(config.out_dir / "summary.csv", {"run_id", "model_variant", "eer", "sparsity_fraction", "mean_speedup"});
  for (const fs::path& path : reports) {
    const CsvTable t = read_csv(path);
    std::map<std::string, std::string> metrics;
    for (const auto& row : t.rows) metrics[row.at(t.column("metric"))] = row.at(t.column("value"));
    auto metric = [&](const std::string& key) {
      if (!metrics.count(key)) throw FormatError(path.string() + ": missing metric " + key);
      return parse_double(metrics[key], path.string() + " " + key);
    };
    const std::string v = variant_name(path);
    std::string speedup;
    const fs::path bench = config.out_dir / (v + ".bench.csv");
    if (fs::exists(bench)) {
      const CsvTable b = read_csv(bench);
      double sum = 0.0;
      for (const auto& row : b.rows) sum += parse_double(row.at(b.column("speedup")), bench.string());
      if (!b.rows.empty()) speedup = format_number(sum / static_cast<double>(b.rows.size()));
    }
    summary.row({config.run_id(), v, metric("eer"), metric("sparsity_fraction"), speedup});
    log << "report: " << v << " eer " << format_number(metric("eer")) << "\n";
  }
  summary.close();
  log << "report: wrote " << (config.out_dir / "summary.csv").string() << "\n";
  return 0;
}

}  // namespace ssv
