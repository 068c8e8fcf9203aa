#pragma once

#include <stdexcept>
#include <string>

namespace panosum {

/// Base class of all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define PANOSUM_DEFINE_ERROR(NAME)                                        \
  class NAME : public Error {                                             \
  public:                                                                 \
    explicit NAME(const std::string& what = #NAME) : Error(what) {}       \
  }

// image IO
PANOSUM_DEFINE_ERROR(UnsupportedFormat);
PANOSUM_DEFINE_ERROR(MalformedImage);
PANOSUM_DEFINE_ERROR(EmptySequence);
PANOSUM_DEFINE_ERROR(DimensionMismatch);
PANOSUM_DEFINE_ERROR(MissingField);
PANOSUM_DEFINE_ERROR(InvalidValue);
PANOSUM_DEFINE_ERROR(IoError);

// features
PANOSUM_DEFINE_ERROR(ImageTooSmall);
PANOSUM_DEFINE_ERROR(OutOfBounds);

// geometry
PANOSUM_DEFINE_ERROR(InsufficientCorrespondences);
PANOSUM_DEFINE_ERROR(DegenerateConfiguration);
PANOSUM_DEFINE_ERROR(CheiralityFailure);
PANOSUM_DEFINE_ERROR(ZeroBaseline);
PANOSUM_DEFINE_ERROR(PointAtInfinity);
PANOSUM_DEFINE_ERROR(NoConsensus);
PANOSUM_DEFINE_ERROR(BehindCamera);
PANOSUM_DEFINE_ERROR(InsufficientMatches);
PANOSUM_DEFINE_ERROR(MissingPose);

#undef PANOSUM_DEFINE_ERROR

}  // namespace panosum
