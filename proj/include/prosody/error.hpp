// Copyright 2026 The prosody authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace prosody {

/// Broad classification used by the CLI exit codes and the HTTP status mapping.
enum class ErrorKind {
  kInvalidArgument,  // caller violated a precondition
  kData,             // malformed or inconsistent input data
  kNotFound,
  kConflict,
  kNumerical,        // non-finite values during training
};

/// Every failure raised by the library carries the component that detected it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string component, const std::string& message)
      : std::runtime_error(component + ": " + message),
        kind_(kind),
        component_(std::move(component)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& component() const { return component_; }

 private:
  ErrorKind kind_;
  std::string component_;
};

inline Error invalid_argument(std::string component, const std::string& msg) {
  return Error(ErrorKind::kInvalidArgument, std::move(component), msg);
}

inline Error data_error(std::string component, const std::string& msg) {
  return Error(ErrorKind::kData, std::move(component), msg);
}

}  // namespace prosody
