// Copyright (C) 2026 latsketch contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace latsketch {

/// Process exit codes shared by the CLI and the acceptance tooling.
enum class ExitCode : int {
    ok = 0,
    usage = 2,
    data = 3,
    model = 4,
    divergence = 5,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad arguments, mismatched shapes, ids out of range.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ExitCode::usage, what) {}
};

class ShapeError : public UsageError {
public:
    explicit ShapeError(const std::string& what) : UsageError("shape mismatch: " + what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Checkpoint format problems, digest mismatches, frozen-model violations.
class ModelError : public Error {
public:
    explicit ModelError(const std::string& what) : Error(ExitCode::model, what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ExitCode::divergence, what) {}
};

}  // namespace latsketch
