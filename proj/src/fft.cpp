#include "ssv/fft.hpp"

#include <fftw3.h>

#include <string>
#include <vector>

#include "ssv/errors.hpp"

namespace ssv {

struct Fft::Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

namespace {

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

Fft::Fft(std::size_t n) : n_(n), plans_(std::make_unique<Plans>()) {
  if (n == 0 || n > (std::size_t{1} << 24)) throw DomainError("unsupported FFT length " + std::to_string(n));
  std::vector<std::complex<double>> scratch(n);
  const int len = static_cast<int>(n);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans_->forward = fftw_plan_dft_1d(len, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_FORWARD, flags);
  plans_->inverse = fftw_plan_dft_1d(len, as_fftw(scratch.data()), as_fftw(scratch.data()), FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->inverse) throw DomainError("FFTW could not plan length " + std::to_string(n));
}

Fft::~Fft() {
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->inverse) fftw_destroy_plan(plans_->inverse);
}

void Fft::forward(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw ShapeError("FFT of length " + std::to_string(n_) + " given " + std::to_string(data.size()) + " values");
  fftw_execute_dft(plans_->forward, as_fftw(data.data()), as_fftw(data.data()));
}

void Fft::inverse(std::span<std::complex<double>> data) const {
  if (data.size() != n_) throw ShapeError("FFT of length " + std::to_string(n_) + " given " + std::to_string(data.size()) + " values");
  fftw_execute_dft(plans_->inverse, as_fftw(data.data()), as_fftw(data.data()));
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= scale;
}

}  // namespace ssv
