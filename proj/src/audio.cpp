#include "ssv/audio.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <iterator>
#include <numbers>

#include "binary_io.hpp"
#include "ssv/errors.hpp"
#include "ssv/fft.hpp"

namespace ssv {

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate != kSampleRate)
    throw UnsupportedRateError("sample rate " + std::to_string(clip.sample_rate) +
                               " Hz; only 16000 Hz is supported");
  for (double s : clip.samples)
    if (!std::isfinite(s)) throw DomainError("audio clip contains non-finite samples");
}

// ---------------------------------------------------------------------------
// WAV

AudioClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  auto tag = [&](std::size_t at, const char* id) {
    return at + 4 <= bytes.size() && std::equal(id, id + 4, bytes.begin() + at);
  };
  if (!tag(0, "RIFF") || !tag(8, "WAVE")) throw FormatError(path.string() + ": not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint32_t rate = 0;
  for (std::size_t at = 12; at + 8 <= bytes.size();) {
    const std::uint32_t size = detail::get_u32(&bytes[at + 4]);
    const std::size_t body = at + 8;
    if (tag(at, "fmt ")) {
      if (size < 16 || body + 16 > bytes.size()) throw FormatError(path.string() + ": truncated fmt chunk");
      const std::uint16_t format = detail::get_u16(&bytes[body]);
      const std::uint16_t channels = detail::get_u16(&bytes[body + 2]);
      rate = detail::get_u32(&bytes[body + 4]);
      const std::uint16_t bits = detail::get_u16(&bytes[body + 14]);
      if (format != 1 || channels != 1 || bits != 16)
        throw UnsupportedFormatError(path.string() + ": need 16-bit PCM mono (format " +
                                     std::to_string(format) + ", " + std::to_string(channels) +
                                     " channels, " + std::to_string(bits) + " bits)");
      if (rate != kSampleRate)
        throw UnsupportedRateError(path.string() + ": sample rate " + std::to_string(rate) +
                                   " Hz; only 16000 Hz is supported");
      have_fmt = true;
    } else if (tag(at, "data")) {
      if (!have_fmt) throw FormatError(path.string() + ": data chunk before fmt chunk");
      if (body + size > bytes.size() || size % 2 != 0)
        throw FormatError(path.string() + ": truncated data chunk");
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(detail::get_u16(&bytes[body + 2 * i]));
        clip.samples[i] = raw / 32768.0;
      }
      return clip;
    }
    at = body + size + (size & 1);
  }
  throw FormatError(path.string() + (have_fmt ? ": missing data chunk" : ": missing fmt chunk"));
}

void save_wav(const AudioClip& clip, const std::filesystem::path& path) {
  validate_clip(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + data_bytes);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.write("data", 4);
  detail::put_u32(out, data_bytes);
  for (double s : clip.samples) {
    const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    detail::put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// VAD

AudioClip vad_trim(const AudioClip& clip, double rel_threshold) {
  if (!(rel_threshold > 0.0 && rel_threshold < 1.0))
    throw DomainError("VAD threshold must lie in (0, 1), got " + std::to_string(rel_threshold));
  const std::size_t n = clip.samples.size();
  std::vector<double> energy;
  for (std::size_t start = 0; start < n; start += kVadFrame) {
    const std::size_t end = std::min(n, start + kVadFrame);
    double e = 0.0;
    for (std::size_t i = start; i < end; ++i) e += clip.samples[i] * clip.samples[i];
    energy.push_back(e / static_cast<double>(end - start));
  }
  const double peak = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  if (!(peak > 0.0)) throw EmptyVoiceError("no voiced frames: clip is silent");

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.reserve(n);
  for (std::size_t f = 0; f < energy.size(); ++f) {
    if (energy[f] < rel_threshold * peak) continue;
    const std::size_t start = f * kVadFrame, end = std::min(n, start + kVadFrame);
    out.samples.insert(out.samples.end(), clip.samples.begin() + start, clip.samples.begin() + end);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral features

Tensor spectrogram(const AudioClip& clip) {
  const std::size_t n = clip.samples.size();
  if (n < kFrameLength)
    throw ShapeError("spectrogram needs at least " + std::to_string(kFrameLength) +
                     " samples, got " + std::to_string(n));
  const std::size_t frames = (n - kFrameLength) / kFrameHop + 1;

  static const Fft fft(kFftSize);
  std::vector<double> window(kFrameLength);
  for (std::size_t i = 0; i < kFrameLength; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (kFrameLength - 1));

  Tensor spec({kFreqBins, frames});
  std::vector<std::complex<double>> buf(kFftSize);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = clip.samples.data() + t * kFrameHop;
    for (std::size_t i = 0; i < kFftSize; ++i)
      buf[i] = i < kFrameLength ? frame[i] * window[i] : 0.0;
    fft.forward(buf);
    for (std::size_t k = 0; k < kFreqBins; ++k) spec.at(k, t) = std::log(std::abs(buf[k]) + kLogFloor);
  }
  return spec;
}

namespace {

// Mirror index without repeating the edge sample, as in numpy's "reflect".
std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - m);
}

}  // namespace

Tensor fit_time(const Tensor& spec) {
  require_rank(spec, 2, "fit_time input");
  const std::size_t rows = spec.dim(0), frames = spec.dim(1);
  if (frames == kCubeFrames) return spec;
  Tensor out({rows, kCubeFrames});
  for (std::size_t j = 0; j < kCubeFrames; ++j) {
    std::size_t src;
    if (frames > kCubeFrames) {
      src = j + (frames - kCubeFrames) / 2;
    } else {
      const long left = static_cast<long>((kCubeFrames - frames) / 2);
      src = reflect_index(static_cast<long>(j) - left, frames);
    }
    for (std::size_t r = 0; r < rows; ++r) out.at(r, j) = spec.at(r, src);
  }
  return out;
}

Tensor deltas(const Tensor& spec) {
  require_rank(spec, 2, "deltas input");
  const std::size_t rows = spec.dim(0), frames = spec.dim(1);
  const long last = static_cast<long>(frames) - 1;
  auto col = [&](long t) { return static_cast<std::size_t>(std::clamp(t, 0L, last)); };
  Tensor out(spec.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (long t = 0; t <= last; ++t) {
      const double num = 1.0 * (spec.at(r, col(t + 1)) - spec.at(r, col(t - 1))) +
                         2.0 * (spec.at(r, col(t + 2)) - spec.at(r, col(t - 2)));
      out.at(r, static_cast<std::size_t>(t)) = num / 10.0;
    }
  return out;
}

FeatureCube::FeatureCube(Tensor data) : data_(std::move(data)) {
  if (data_.shape() != Shape{kCubeChannels, kFreqBins, kCubeFrames})
    throw ShapeError("feature cube must be (3,256,100), got " + shape_string(data_.shape()));
  if (!data_.all_finite()) throw DomainError("feature cube contains non-finite values");
}

FeatureCube feature_cube(const AudioClip& clip, double vad_threshold) {
  validate_clip(clip);
  AudioClip voiced = vad_trim(clip, vad_threshold);
  if (voiced.samples.size() < kSampleRate)
    throw EmptyVoiceError("only " + std::to_string(voiced.samples.size()) +
                          " voiced samples; one second (16000) is required");
  voiced.samples.resize(kSampleRate);

  const Tensor stat = fit_time(spectrogram(voiced));
  const Tensor d1 = deltas(stat);
  const Tensor d2 = deltas(d1);

  const std::size_t plane = kFreqBins * kCubeFrames;
  Tensor cube({kCubeChannels, kFreqBins, kCubeFrames});
  const Tensor* parts[kCubeChannels] = {&stat, &d1, &d2};
  for (std::size_t c = 0; c < kCubeChannels; ++c) {
    const double* src = parts[c]->raw();
    double* dst = cube.raw() + c * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += src[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(plane);
    const double inv_std = 1.0 / std::sqrt(std::max(var, 1e-8));
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (src[i] - mean) * inv_std;
  }
  return FeatureCube(std::move(cube));
}

// ---------------------------------------------------------------------------
// FCUB files

void save_feature_file(const FeatureCube& cube, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write("FCUB", 4);
  detail::put_u32(out, kFeatureFileVersion);
  const Shape& shape = cube.tensor().shape();
  detail::put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
  detail::put_f64s(out, cube.tensor().data());
  if (!out) throw FormatError("failed writing " + path.string());
}

FeatureCube load_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!detail::read_exact(in, magic, 4) || std::string(magic, 4) != "FCUB")
    throw FormatError(path.string() + ": not an FCUB feature file");
  std::uint32_t version = 0, rank = 0;
  if (!detail::read_u32(in, version)) throw FormatError(path.string() + ": truncated header");
  if (version != kFeatureFileVersion)
    throw VersionError(path.string() + ": feature file version " + std::to_string(version) +
                       ", expected " + std::to_string(kFeatureFileVersion));
  if (!detail::read_u32(in, rank) || rank != 3)
    throw FormatError(path.string() + ": feature file must hold a rank-3 cube");
  Shape shape(3);
  for (auto& d : shape) {
    std::uint32_t v = 0;
    if (!detail::read_u32(in, v)) throw FormatError(path.string() + ": truncated header");
    d = v;
  }
  if (shape != Shape{kCubeChannels, kFreqBins, kCubeFrames})
    throw FormatError(path.string() + ": unexpected cube shape " + shape_string(shape));
  Tensor data(shape);
  if (!detail::read_f64s(in, data.data())) throw FormatError(path.string() + ": truncated data");
  return FeatureCube(std::move(data));
}

}  // namespace ssv
