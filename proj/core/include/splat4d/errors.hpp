// Copyright 2026 The splat4d Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace splat4d {

// Base class for every error thrown by the library. Callers that do not care
// about the specific failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input file could not be parsed. Messages include the path and, where it is
// meaningful, the byte offset of the first bad byte.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (open, write, rename).
class IoError : public Error {
 public:
  using Error::Error;
};

class MissingFile : public Error {
 public:
  using Error::Error;
};

// Array shapes disagree with what an operation requires.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

// Scalar argument outside its documented domain.
class OutOfRange : public Error {
 public:
  using Error::Error;
};

// Quaternion norm fell below 1e-8, so it cannot be normalized.
class DegenerateQuaternion : public Error {
 public:
  using Error::Error;
};

// Scene normalization found no valid depth point to measure.
class NoValidPoints : public Error {
 public:
  using Error::Error;
};

// A masked image loss was given an all-false mask.
class NoValidPixels : public Error {
 public:
  using Error::Error;
};

// A masked trajectory metric was given an all-false mask.
class NoValidEntries : public Error {
 public:
  using Error::Error;
};

// Median normalization is undefined when every norm is zero.
class AllZeroNorms : public Error {
 public:
  using Error::Error;
};

// Deformation field has no keyframes.
class EmptyField : public Error {
 public:
  using Error::Error;
};

// Optimizer saw a NaN or Inf gradient; the message names the parameter group.
class NonFiniteGradient : public Error {
 public:
  using Error::Error;
};

}  // namespace splat4d
