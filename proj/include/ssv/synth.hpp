#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ssv/audio.hpp"

namespace ssv {

inline constexpr double kMinF0 = 90.0;
inline constexpr double kMaxF0 = 255.0;
inline constexpr double kMaxPartialHz = 4000.0;
inline constexpr double kFormantWidthHz = 150.0;
inline constexpr double kF0Jitter = 0.03;
inline constexpr double kSnrDb = 20.0;
inline constexpr double kPeakLevel = 0.9;

struct SpeakerProfile {
  double f0 = 0.0;
  std::array<double, 3> formants{};  // strictly increasing, within [300, 3400] Hz
  std::array<double, 3> gains{};
  std::uint64_t seed = 0;

  friend bool operator==(const SpeakerProfile&, const SpeakerProfile&) = default;
};

SpeakerProfile synth_speaker(std::uint64_t seed);

// Per-utterance draws, exposed so tests can check the rendered spectrum.
struct UtteranceParams {
  double f0 = 0.0;
  std::vector<double> phases;  // one per partial
  std::uint64_t noise_seed = 0;
};

UtteranceParams utterance_params(const SpeakerProfile& profile, std::uint64_t utterance_seed);

// Spectral envelope the partials are weighted by.
double formant_envelope(const SpeakerProfile& profile, double hz);

// One second at 16 kHz: harmonics of a jittered f0 shaped by the formant
// envelope, plus white noise at 20 dB SNR, peak-normalised to 0.9.
AudioClip synth_utterance(const SpeakerProfile& profile, std::uint64_t utterance_seed);

struct SynthDataset {
  std::uint64_t master_seed = 0;
  std::vector<SpeakerProfile> speakers;
  std::vector<std::vector<AudioClip>> utterances;  // [speaker][utterance]
};

SynthDataset synth_dataset(std::size_t n_speakers, std::size_t n_utterances,
                           std::uint64_t master_seed);

}  // namespace ssv
