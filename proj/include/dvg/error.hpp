/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace dvg {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of the differentiation tape (double backward, foreign variables).
class TapeError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or mismatched on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A required upstream artifact does not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

// Artifact was produced by a run with a different configuration.
class LineageError : public Error {
 public:
  using Error::Error;
};

// A training quality gate was not met.
class GateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dvg
