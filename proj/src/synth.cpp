#include "ssv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ssv/errors.hpp"
#include "ssv/rng.hpp"

namespace ssv {

SpeakerProfile synth_speaker(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SpeakerProfile p;
  p.seed = seed;
  p.f0 = uniform(kMinF0, kMaxF0);
  // One formant per disjoint band keeps the centres strictly increasing.
  p.formants = {uniform(300.0, 1000.0), uniform(1000.0, 2200.0), uniform(2200.0, 3400.0)};
  for (double& g : p.gains) g = uniform(0.4, 1.0);
  return p;
}

double formant_envelope(const SpeakerProfile& profile, double hz) {
  double e = 0.05;
  for (std::size_t k = 0; k < profile.formants.size(); ++k) {
    const double z = (hz - profile.formants[k]) / kFormantWidthHz;
    e += profile.gains[k] * std::exp(-0.5 * z * z);
  }
  return e;
}

UtteranceParams utterance_params(const SpeakerProfile& profile, std::uint64_t utterance_seed) {
  std::mt19937_64 rng(derive_seed(profile.seed, utterance_seed));
  UtteranceParams u;
  u.f0 = profile.f0 * (1.0 + std::uniform_real_distribution<double>(-kF0Jitter, kF0Jitter)(rng));
  const auto partials = static_cast<std::size_t>(std::floor(kMaxPartialHz / u.f0));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  u.phases.resize(partials);
  for (double& ph : u.phases) ph = phase(rng);
  u.noise_seed = rng();
  return u;
}

AudioClip synth_utterance(const SpeakerProfile& profile, std::uint64_t utterance_seed) {
  const UtteranceParams u = utterance_params(profile, utterance_seed);
  AudioClip clip;
  clip.samples.assign(kSampleRate, 0.0);
  for (std::size_t h = 0; h < u.phases.size(); ++h) {
    const double hz = u.f0 * static_cast<double>(h + 1);
    const double amp = formant_envelope(profile, hz);
    const double step = 2.0 * std::numbers::pi * hz / kSampleRate;
    for (std::size_t n = 0; n < clip.samples.size(); ++n)
      clip.samples[n] += amp * std::sin(step * static_cast<double>(n) + u.phases[h]);
  }

  double power = 0.0;
  for (double s : clip.samples) power += s * s;
  power /= static_cast<double>(clip.samples.size());
  const double noise_sd = std::sqrt(power / std::pow(10.0, kSnrDb / 10.0));
  std::mt19937_64 rng(u.noise_seed);
  std::normal_distribution<double> noise(0.0, noise_sd);
  for (double& s : clip.samples) s += noise(rng);

  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  for (double& s : clip.samples) s *= kPeakLevel / peak;
  return clip;
}

SynthDataset synth_dataset(std::size_t n_speakers, std::size_t n_utterances,
                           std::uint64_t master_seed) {
  if (n_speakers == 0 || n_utterances == 0)
    throw DomainError("synthetic dataset needs at least one speaker and one utterance");
  SynthDataset ds;
  ds.master_seed = master_seed;
  for (std::size_t s = 0; s < n_speakers; ++s) {
    ds.speakers.push_back(synth_speaker(derive_seed(master_seed, s)));
    auto& clips = ds.utterances.emplace_back();
    for (std::size_t u = 0; u < n_utterances; ++u)
      clips.push_back(synth_utterance(ds.speakers.back(), u));
  }
  return ds;
}

}  // namespace ssv
