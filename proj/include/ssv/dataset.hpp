#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssv/audio.hpp"
#include "ssv/synth.hpp"

namespace ssv {

struct Utterance {
  std::string speaker_id;
  std::string utt_id;
  FeatureCube features;
};

// Utterances in a fixed order; speakers are grouped by id, in order of first
// appearance.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Utterance> utterances);

  const std::vector<Utterance>& utterances() const { return utterances_; }
  const Utterance& operator[](std::size_t i) const { return utterances_.at(i); }
  std::size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }

  // Index lists, one per speaker.
  const std::vector<std::vector<std::size_t>>& speakers() const { return speakers_; }
  // Speaker index of utterance i.
  std::size_t speaker_of(std::size_t i) const { return speaker_of_.at(i); }

 private:
  std::vector<Utterance> utterances_;
  std::vector<std::vector<std::size_t>> speakers_;
  std::vector<std::size_t> speaker_of_;
};

inline constexpr const char* kFeatureManifest = "features.csv";

// Reads `<dir>/features.csv` (speaker_id,utt_id,path; paths relative to dir)
// and every FCUB file it lists.
Dataset load_dataset(const std::filesystem::path& dir);

// Naming used for synthetic speakers and their WAV / FCUB files.
std::string synth_speaker_id(std::size_t speaker);
std::string synth_utterance_id(std::size_t speaker, std::size_t utterance);

// Feature cubes for every clip of a synthetic dataset, computed in memory.
Dataset synth_features(const SynthDataset& synth, double vad_threshold = kDefaultVadThreshold);

struct DatasetSplit {
  Dataset train;
  Dataset dev;
};

// Closed-set split: the last `dev_per_speaker` utterances of every speaker go
// to dev. Each speaker must keep at least two training utterances.
DatasetSplit split_dataset(const Dataset& data, std::size_t dev_per_speaker);

}  // namespace ssv
