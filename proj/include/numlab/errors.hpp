#pragma once

#include <stdexcept>
#include <string>

namespace numlab {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define NUMLAB_DEFINE_ERROR(Name)              \
  class Name : public Error {                  \
   public:                                     \
    explicit Name(const std::string& what)     \
        : Error(std::string(#Name ": ") + what) {} \
  }

NUMLAB_DEFINE_ERROR(InvalidArgument);
NUMLAB_DEFINE_ERROR(InsufficientTail);
NUMLAB_DEFINE_ERROR(NonFiniteValue);
NUMLAB_DEFINE_ERROR(UnsupportedLambda);
NUMLAB_DEFINE_ERROR(ShapeMismatch);
NUMLAB_DEFINE_ERROR(DimensionCapExceeded);
NUMLAB_DEFINE_ERROR(ZeroProduct);
NUMLAB_DEFINE_ERROR(NotSymmetric);
NUMLAB_DEFINE_ERROR(NegativeEigenvalue);
NUMLAB_DEFINE_ERROR(ConfigError);
NUMLAB_DEFINE_ERROR(NotWhitened);
NUMLAB_DEFINE_ERROR(ParseError);
NUMLAB_DEFINE_ERROR(EmptySeries);
NUMLAB_DEFINE_ERROR(IoError);

#undef NUMLAB_DEFINE_ERROR

}  // namespace numlab
