#pragma once

#include <stdexcept>
#include <string>

namespace cxr {

/// Base of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad inputs: files, configs, schemas, sizes. CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical/runtime failures inside a computation. CLI maps these to exit code 3.
class ComputeError : public Error {
 public:
  using Error::Error;
};

#define CXR_INPUT_ERROR(NAME)                      \
  class NAME : public InputError {                 \
   public:                                         \
    using InputError::InputError;                  \
  }

#define CXR_COMPUTE_ERROR(NAME)                    \
  class NAME : public ComputeError {               \
   public:                                         \
    using ComputeError::ComputeError;              \
  }

// dataio
CXR_INPUT_ERROR(MissingClassDirectory);
CXR_INPUT_ERROR(EmptyDataset);
CXR_INPUT_ERROR(InsufficientSamples);
CXR_INPUT_ERROR(InvalidFraction);
CXR_INPUT_ERROR(ClassTooSmall);
CXR_INPUT_ERROR(InvalidK);
CXR_INPUT_ERROR(UnknownLabel);

// stats
CXR_INPUT_ERROR(EmptyImage);

// model / training
CXR_INPUT_ERROR(InvalidShape);
CXR_INPUT_ERROR(ShapeMismatch);
CXR_INPUT_ERROR(EmptyTrainingSet);
CXR_INPUT_ERROR(SchemaMismatch);
CXR_COMPUTE_ERROR(NonFiniteLoss);
CXR_COMPUTE_ERROR(DecodeFailure);

// metrics
CXR_INPUT_ERROR(LengthMismatch);
CXR_INPUT_ERROR(EmptyMatrix);

// cascade
CXR_COMPUTE_ERROR(InvalidDistribution);
CXR_INPUT_ERROR(UnfittedStage);
CXR_INPUT_ERROR(EmptyTestSet);

// files / configs
CXR_INPUT_ERROR(ParseFailure);
CXR_INPUT_ERROR(NonSquareMatrix);
CXR_INPUT_ERROR(IoFailure);
CXR_INPUT_ERROR(ConfigInvalid);

#undef CXR_INPUT_ERROR
#undef CXR_COMPUTE_ERROR

}  // namespace cxr
