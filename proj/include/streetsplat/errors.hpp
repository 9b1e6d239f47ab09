#pragma once

#include <stdexcept>
#include <string>

namespace streetsplat {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STREETSPLAT_ERROR(Name)                       \
  class Name : public Error {                         \
   public:                                            \
    explicit Name(const std::string& what)            \
        : Error(std::string(#Name ": ") + what) {}    \
  }

STREETSPLAT_ERROR(DomainError);
STREETSPLAT_ERROR(FormatError);
STREETSPLAT_ERROR(DegenerateRays);
STREETSPLAT_ERROR(BehindCamera);
STREETSPLAT_ERROR(DegenerateCloud);
STREETSPLAT_ERROR(VerticalPlane);
STREETSPLAT_ERROR(DimensionMismatch);
STREETSPLAT_ERROR(StaleState);
STREETSPLAT_ERROR(EmptyVolume);

#undef STREETSPLAT_ERROR

class MissingFrame : public Error {
 public:
  explicit MissingFrame(int index)
      : Error("MissingFrame(" + std::to_string(index) + ")"), index_(index) {}
  int index() const { return index_; }

 private:
  int index_;
};

}  // namespace streetsplat
