#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ssv/tensor.hpp"

namespace ssv {

inline constexpr std::size_t kSampleRate = 16000;
inline constexpr std::size_t kFrameLength = 400;  // 25 ms
inline constexpr std::size_t kFrameHop = 160;     // 10 ms, i.e. 15 ms overlap
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kFreqBins = 256;     // bins 0..255, Nyquist dropped
inline constexpr std::size_t kCubeFrames = 100;
inline constexpr std::size_t kCubeChannels = 3;
inline constexpr std::size_t kVadFrame = 160;     // 10 ms
inline constexpr double kDefaultVadThreshold = 0.05;
inline constexpr double kLogFloor = 1e-10;

struct AudioClip {
  std::vector<double> samples;
  std::size_t sample_rate = kSampleRate;
};

// Throws UnsupportedRateError / DomainError unless the clip is 16 kHz with
// finite samples.
void validate_clip(const AudioClip& clip);

// RIFF/WAVE, PCM 16-bit, mono, 16 kHz. Samples are scaled by 1/32768.
AudioClip load_wav(const std::filesystem::path& path);
void save_wav(const AudioClip& clip, const std::filesystem::path& path);

// Energy VAD over 10 ms frames: keeps frames whose mean-square energy reaches
// rel_threshold times the loudest frame's energy.
AudioClip vad_trim(const AudioClip& clip, double rel_threshold);

// Hamming-windowed 25 ms frames every 10 ms, 512-point FFT, log magnitude of
// bins 0..255. Returns [256, T] with T = (len - 400) / 160 + 1.
Tensor spectrogram(const AudioClip& clip);

// Reflect-pads (T < 100) or center-crops (T > 100) the time axis to 100 frames.
Tensor fit_time(const Tensor& spec);

// Regression deltas with a +-2 frame window; edges replicate the end frames.
Tensor deltas(const Tensor& spec);

// Three-channel log-spectrogram / delta / delta-delta cube for one second of
// voiced audio, normalised per channel to zero mean and unit variance.
class FeatureCube {
 public:
  FeatureCube() : data_({kCubeChannels, kFreqBins, kCubeFrames}) {}
  explicit FeatureCube(Tensor data);

  const Tensor& tensor() const { return data_; }

  friend bool operator==(const FeatureCube&, const FeatureCube&) = default;

 private:
  Tensor data_;
};

FeatureCube feature_cube(const AudioClip& clip, double vad_threshold = kDefaultVadThreshold);

// FCUB feature file: "FCUB", u32 version, u32 rank, u32 shape[rank], then the
// values as little-endian doubles.
inline constexpr std::uint32_t kFeatureFileVersion = 1;
void save_feature_file(const FeatureCube& cube, const std::filesystem::path& path);
FeatureCube load_feature_file(const std::filesystem::path& path);

}  // namespace ssv
