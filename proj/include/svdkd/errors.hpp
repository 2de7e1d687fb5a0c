#pragma once

#include <stdexcept>
#include <string>

namespace svdkd {

// Root of every error raised by the library. The CLI maps any Error to exit
// code 1 and prints what() verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SVDKD_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

SVDKD_DEFINE_ERROR(ArgumentError);
SVDKD_DEFINE_ERROR(FormatError);
SVDKD_DEFINE_ERROR(DataError);
SVDKD_DEFINE_ERROR(IoError);
SVDKD_DEFINE_ERROR(SamplingError);
SVDKD_DEFINE_ERROR(NumericalError);
SVDKD_DEFINE_ERROR(DegenerateSpectrumError);
SVDKD_DEFINE_ERROR(MiningError);
SVDKD_DEFINE_ERROR(EvalError);

#undef SVDKD_DEFINE_ERROR

}  // namespace svdkd
