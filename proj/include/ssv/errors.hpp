#pragma once

#include <stdexcept>
#include <string>

namespace ssv {

// Every failure the library reports derives from ssv::Error so callers can
// catch the whole family at a command boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SSV_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

SSV_DEFINE_ERROR(ShapeError);
SSV_DEFINE_ERROR(DomainError);
SSV_DEFINE_ERROR(FormatError);
SSV_DEFINE_ERROR(UnsupportedFormatError);
SSV_DEFINE_ERROR(UnsupportedRateError);
SSV_DEFINE_ERROR(EmptyVoiceError);
SSV_DEFINE_ERROR(ConfigError);
SSV_DEFINE_ERROR(CheckpointError);
SSV_DEFINE_ERROR(ContractError);
SSV_DEFINE_ERROR(CapacityError);
SSV_DEFINE_ERROR(DivergenceError);
SSV_DEFINE_ERROR(BenchError);

#undef SSV_DEFINE_ERROR

// A file carried a recognised magic but a format version this build does not read.
class VersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace ssv
