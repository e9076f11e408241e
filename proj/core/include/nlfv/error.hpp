// Copyright Contributors to the nlfv Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace nlfv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid shapes, unreachable resolutions, bad hyperparameters.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// An API was called in a way its contract forbids.
class UsageError : public Error {
  public:
    using Error::Error;
};

/// NaN or Inf produced by a forward or backward pass.
class NumericFault : public Error {
  public:
    using Error::Error;
};

/// Malformed or missing files (PPM, manifest, checkpoint).
class LoadError : public Error {
  public:
    using Error::Error;
};

/// Invalid synthetic scene description.
class SpecError : public Error {
  public:
    using Error::Error;
};

} // namespace nlfv
