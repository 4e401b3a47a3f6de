#pragma once

#include <stdexcept>
#include <string>

namespace liteseg {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension mismatches.
class ShapeError : public Error {
  public:
    using Error::Error;
};

// Invalid model / training / schedule configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

// File and image I/O failures.
class IoError : public Error {
  public:
    using Error::Error;
};

// NaN/Inf detected where finite values are required (fail fast).
class NumericError : public Error {
  public:
    using Error::Error;
};

class CheckpointError : public Error {
  public:
    enum class Kind {
        NotACheckpoint,
        VersionMismatch,
        Truncated,
        UnknownTensor,
        MissingTensor,
        ShapeMismatch,
        ConfigMismatch,
    };

    CheckpointError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

}  // namespace liteseg
