#pragma once

#include <stdexcept>
#include <string>

namespace lcl {

/// Base class for all recoverable geometric/numeric failures. Callers that
/// iterate over frames typically catch these and skip the offending input.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- geometry ---

/// Vanishing point too close to an image axis: the top-down frame of Eq-style
/// rectification is ill conditioned (|x_v| or |y_v| below eps).
class DegenerateVanishingPoint : public Error {
 public:
  using Error::Error;
};

/// Homogeneous denominator vanished: the pixel lies on the rectified horizon.
class PointAtHorizon : public Error {
 public:
  using Error::Error;
};

/// Two source or two destination points coincide; a 2-point similarity is
/// underdetermined.
class CoincidentPoints : public Error {
 public:
  using Error::Error;
};

/// Relative rotation too close to identity; (I - R) is not invertible enough
/// for the motion-constrained correspondence.
class DegenerateMotion : public Error {
 public:
  using Error::Error;
};

/// Epipolar geometry undefined for zero relative translation.
class ZeroTranslation : public Error {
 public:
  using Error::Error;
};

// --- frontend ---

class IcpDiverged : public Error {
 public:
  using Error::Error;
};

// --- alignment ---

/// No scan pair in the window exceeds the minimum rotation; hypothesis
/// generation must wait for more frames.
class NoValidMotion : public Error {
 public:
  using Error::Error;
};

// --- simulator ---

class PoseOutsideWorld : public Error {
 public:
  using Error::Error;
};

// --- evaluation ---

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NoCorners : public Error {
 public:
  using Error::Error;
};

class InvalidPolygon : public Error {
 public:
  using Error::Error;
};

// --- io ---

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcl
