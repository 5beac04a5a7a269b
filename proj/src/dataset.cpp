#include "ssv/dataset.hpp"

#include <cstdio>
#include <map>
#include <set>

#include "ssv/csv.hpp"
#include "ssv/errors.hpp"

namespace ssv {

Dataset::Dataset(std::vector<Utterance> utterances) : utterances_(std::move(utterances)) {
  std::map<std::string, std::size_t> index;
  std::set<std::pair<std::string, std::string>> seen;
  speaker_of_.reserve(utterances_.size());
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    const Utterance& u = utterances_[i];
    if (u.speaker_id.empty() || u.utt_id.empty()) throw FormatError("utterance with an empty id");
    if (!seen.emplace(u.speaker_id, u.utt_id).second)
      throw FormatError("duplicate utterance " + u.speaker_id + "/" + u.utt_id);
    const auto [it, fresh] = index.emplace(u.speaker_id, speakers_.size());
    if (fresh) speakers_.emplace_back();
    speakers_[it->second].push_back(i);
    speaker_of_.push_back(it->second);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const CsvTable table = read_csv(dir / kFeatureManifest);
  const std::size_t spk = table.column("speaker_id"), utt = table.column("utt_id"), path = table.column("path");
  std::vector<Utterance> utts;
  utts.reserve(table.rows.size());
  for (const auto& row : table.rows)
    utts.push_back({row[spk], row[utt], load_feature_file(dir / row[path])});
  if (utts.empty()) throw FormatError((dir / kFeatureManifest).string() + " lists no utterances");
  return Dataset(std::move(utts));
}

std::string synth_speaker_id(std::size_t speaker) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "spk%03zu", speaker);
  return buf;
}

std::string synth_utterance_id(std::size_t speaker, std::size_t utterance) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "spk%03zu_u%03zu", speaker, utterance);
  return buf;
}

Dataset synth_features(const SynthDataset& synth, double vad_threshold) {
  std::vector<Utterance> utts;
  for (std::size_t s = 0; s < synth.utterances.size(); ++s)
    for (std::size_t u = 0; u < synth.utterances[s].size(); ++u)
      utts.push_back({synth_speaker_id(s), synth_utterance_id(s, u),
                      feature_cube(synth.utterances[s][u], vad_threshold)});
  return Dataset(std::move(utts));
}

DatasetSplit split_dataset(const Dataset& data, std::size_t dev_per_speaker) {
  std::vector<Utterance> train, dev;
  for (const auto& idx : data.speakers()) {
    if (idx.size() < dev_per_speaker + 2)
      throw CapacityError("speaker " + data[idx.front()].speaker_id + " has " + std::to_string(idx.size()) +
                          " utterances; needs " + std::to_string(dev_per_speaker + 2) + " to hold out " +
                          std::to_string(dev_per_speaker));
    const std::size_t cut = idx.size() - dev_per_speaker;
    for (std::size_t k = 0; k < idx.size(); ++k) (k < cut ? train : dev).push_back(data[idx[k]]);
  }
  return {Dataset(std::move(train)), Dataset(std::move(dev))};
}

}  // namespace ssv
