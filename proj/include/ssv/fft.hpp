#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace ssv {

// In-place complex transform of one fixed length, backed by FFTW.
// Plans are made with FFTW_ESTIMATE so results do not depend on timing.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }
  void forward(std::span<std::complex<double>> data) const;
  // Includes the 1/n scaling, so inverse(forward(x)) == x up to rounding.
  void inverse(std::span<std::complex<double>> data) const;

 private:
  struct Plans;
  std::size_t n_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace ssv
