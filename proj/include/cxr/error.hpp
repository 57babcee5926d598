#pragma once

#include <stdexcept>
#include <string>

namespace cxr {

// Root of every exception thrown by the toolkit. Catch sites that need to map
// failures onto exit codes or HTTP statuses dispatch on the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CXR_DEFINE_ERROR(Name, Base)          \
  class Name : public Base {                  \
   public:                                    \
    using Base::Base;                         \
  };

// file access
CXR_DEFINE_ERROR(IoError, Error)

// imagecore
CXR_DEFINE_ERROR(DecodeError, Error)
CXR_DEFINE_ERROR(UnsupportedFormat, Error)
CXR_DEFINE_ERROR(ChannelError, Error)
CXR_DEFINE_ERROR(GridError, Error)

// augment
CXR_DEFINE_ERROR(CropError, Error)
CXR_DEFINE_ERROR(ConfigError, Error)

// nn / models
CXR_DEFINE_ERROR(ShapeError, Error)
CXR_DEFINE_ERROR(MissingWeight, Error)
CXR_DEFINE_ERROR(FormatError, Error)
CXR_DEFINE_ERROR(IntegrityError, Error)
CXR_DEFINE_ERROR(HeadError, Error)
CXR_DEFINE_ERROR(UnknownArchitecture, Error)

// explain
CXR_DEFINE_ERROR(LayerNotFound, Error)
CXR_DEFINE_ERROR(UnsupportedMethod, Error)

// evalmetrics
CXR_DEFINE_ERROR(IndexError, Error)
CXR_DEFINE_ERROR(DegenerateSet, Error)
CXR_DEFINE_ERROR(ManifestError, Error)
CXR_DEFINE_ERROR(ProbabilityError, Error)

#undef CXR_DEFINE_ERROR

}  // namespace cxr
