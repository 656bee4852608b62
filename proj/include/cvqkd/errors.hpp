#pragma once

#include <stdexcept>
#include <string>

namespace cvqkd {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument to a DSP or physics operation (bad range, length/rate mismatch).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent run configuration (unknown key, band overlap, bad value).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A simulated measurement failed: calibration, pilot search, sync, physicality.
class PhysicsError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class PilotNotFoundError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class SyncError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class FrameSyncError : public SyncError {
public:
    using SyncError::SyncError;
};

class ChannelEstimationError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class PhysicalityError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class DegenerateInputError : public PhysicsError {
public:
    using PhysicsError::PhysicsError;
};

class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
    if (!cond) {
        throw ParameterError(what);
    }
}

}  // namespace detail

}  // namespace cvqkd
