// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace visrssi {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define VISRSSI_DEFINE_ERROR(Name)          \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

// physics
VISRSSI_DEFINE_ERROR(DistanceTooSmall);
VISRSSI_DEFINE_ERROR(EmptyOrNonPositivePower);
VISRSSI_DEFINE_ERROR(WrongBeamCount);

// autodiff / optim / io
VISRSSI_DEFINE_ERROR(ShapeMismatch);
VISRSSI_DEFINE_ERROR(GraphCycle);
VISRSSI_DEFINE_ERROR(StepOutOfRange);
VISRSSI_DEFINE_ERROR(FormatError);
VISRSSI_DEFINE_ERROR(IoError);

// scene simulation
VISRSSI_DEFINE_ERROR(TxOutOfFrustum);

// dataset
VISRSSI_DEFINE_ERROR(InvalidCoordinate);
VISRSSI_DEFINE_ERROR(MissingTxBox);
VISRSSI_DEFINE_ERROR(MalformedBBoxLine);
VISRSSI_DEFINE_ERROR(BeamCountMismatch);
VISRSSI_DEFINE_ERROR(TooFewSamples);

// training / evaluation
VISRSSI_DEFINE_ERROR(EmptySplit);
VISRSSI_DEFINE_ERROR(NonFiniteLoss);
VISRSSI_DEFINE_ERROR(LengthMismatch);
VISRSSI_DEFINE_ERROR(EmptyInput);
VISRSSI_DEFINE_ERROR(ConfigMismatch);

#undef VISRSSI_DEFINE_ERROR

}  // namespace visrssi
