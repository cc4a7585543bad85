// Copyright (c) 2026 taylorprune contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/operation shape violations; message names the op and dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing, truncated or corrupt input files.
class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite losses, degenerate norms and similar runtime failures.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace tp
