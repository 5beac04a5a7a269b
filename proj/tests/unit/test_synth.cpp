#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>
#include <set>

#include "ssv/audio.hpp"
#include "ssv/fft.hpp"
#include "ssv/synth.hpp"

using namespace ssv;

namespace {

// Magnitude spectrum over a zero-padded 16384-point transform.
std::vector<double> magnitude(const AudioClip& clip) {
  const std::size_t n = 16384;
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < clip.samples.size() && i < n; ++i) buf[i] = clip.samples[i];
  Fft(n).forward(buf);
  std::vector<double> mag(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

double bin_hz() { return static_cast<double>(kSampleRate) / 16384.0; }

}  // namespace

TEST(SynthSpeaker, DeterministicAndInRange) {
  EXPECT_EQ(synth_speaker(5), synth_speaker(5));
  std::set<double> f0s;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SpeakerProfile p = synth_speaker(seed);
    EXPECT_GE(p.f0, kMinF0);
    EXPECT_LE(p.f0, kMaxF0);
    EXPECT_LT(p.formants[0], p.formants[1]);
    EXPECT_LT(p.formants[1], p.formants[2]);
    EXPECT_GE(p.formants[0], 300.0);
    EXPECT_LE(p.formants[2], 3400.0);
    if (seed < 100) f0s.insert(p.f0);
  }
  EXPECT_EQ(f0s.size(), 100u);  // no collisions among the first 100 seeds
}

TEST(SynthUtterance, ShapeAndDeterminism) {
  const SpeakerProfile p = synth_speaker(3);
  const AudioClip a = synth_utterance(p, 0);
  ASSERT_EQ(a.samples.size(), 16000u);
  EXPECT_EQ(a.samples, synth_utterance(p, 0).samples);
  double peak = 0.0;
  for (double s : a.samples) peak = std::max(peak, std::abs(s));
  EXPECT_NEAR(peak, kPeakLevel, 1e-12);
  EXPECT_NE(a.samples, synth_utterance(p, 1).samples);
  EXPECT_NO_THROW(validate_clip(a));
}

TEST(SynthUtterance, SpectralPeakSitsOnAHarmonic) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SpeakerProfile p = synth_speaker(seed);
    const AudioClip clip = synth_utterance(p, seed);
    const std::vector<double> mag = magnitude(clip);
    const auto peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
    const double f0 = utterance_params(p, seed).f0;
    const double harmonic = std::round(peak * bin_hz() / f0) * f0;
    EXPECT_LE(std::abs(peak * bin_hz() - harmonic) / bin_hz(), 2.0) << "seed " << seed;
  }
}

TEST(SynthUtterance, UtterancesShareFormantEnvelope) {
  const SpeakerProfile p = synth_speaker(42);
  const AudioClip a = synth_utterance(p, 1), b = synth_utterance(p, 2);
  EXPECT_NE(a.samples, b.samples);
  // Strongest partial in each utterance lands in the same formant region.
  auto strongest_partial_hz = [&](const AudioClip& clip, double f0) {
    const std::vector<double> mag = magnitude(clip);
    double best = 0.0, best_hz = 0.0;
    for (double hz = f0; hz < kMaxPartialHz; hz += f0) {
      const auto k = static_cast<std::size_t>(std::lround(hz / bin_hz()));
      if (mag[k] > best) best = mag[k], best_hz = hz;
    }
    return best_hz;
  };
  const double ha = strongest_partial_hz(a, utterance_params(p, 1).f0);
  const double hb = strongest_partial_hz(b, utterance_params(p, 2).f0);
  auto nearest_formant = [&](double hz) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k)
      if (std::abs(hz - p.formants[k]) < std::abs(hz - p.formants[best])) best = k;
    return best;
  };
  EXPECT_EQ(nearest_formant(ha), nearest_formant(hb));
}

TEST(SynthDataset, CountsAndReproducible) {
  const SynthDataset a = synth_dataset(4, 3, 99);
  ASSERT_EQ(a.speakers.size(), 4u);
  std::size_t clips = 0;
  for (const auto& s : a.utterances) clips += s.size();
  EXPECT_EQ(clips, 12u);
  const SynthDataset b = synth_dataset(4, 3, 99);
  EXPECT_EQ(a.speakers, b.speakers);
  EXPECT_EQ(a.utterances[3][2].samples, b.utterances[3][2].samples);
}

TEST(SynthDataset, RawFeaturesSeparateSpeakers) {
  const std::size_t speakers = 20, utts = 10;
  const SynthDataset ds = synth_dataset(speakers, utts, 2024);
  std::vector<std::vector<FeatureCube>> cubes(speakers);
  for (std::size_t s = 0; s < speakers; ++s)
    for (const AudioClip& clip : ds.utterances[s]) cubes[s].push_back(feature_cube(clip));

  auto dist = [](const FeatureCube& x, const FeatureCube& y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.tensor().size(); ++i)
      s += std::pow(x.tensor()[i] - y.tensor()[i], 2);
    return std::sqrt(s);
  };
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> spk(0, speakers - 1), utt(0, utts - 1);
  double genuine = 0.0, impostor = 0.0;
  for (int n = 0; n < 100; ++n) {
    const std::size_t s = spk(rng), u1 = utt(rng);
    std::size_t u2 = utt(rng);
    while (u2 == u1) u2 = utt(rng);
    genuine += dist(cubes[s][u1], cubes[s][u2]);
    std::size_t t = spk(rng);
    while (t == s) t = spk(rng);
    impostor += dist(cubes[s][u1], cubes[t][utt(rng)]);
  }
  EXPECT_LT(genuine / 100.0, impostor / 100.0);
}
