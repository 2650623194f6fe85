#pragma once

#include <stdexcept>
#include <string>

namespace stereoref {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied values violate a precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Collinear points, coincident markers, rays behind the camera.
class DegenerateGeometry : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// A constrained pose adjustment would leave its allowed range.
class BoundViolation : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Left/right row coordinates disagree beyond the rectification tolerance.
class RectificationViolation : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Inputs are individually valid but inconsistent with each other.
class DataInconsistency : public Error {
 public:
  using Error::Error;
};

// Failure reading or writing a file. The message always names the path.
class FileError : public Error {
 public:
  enum class Kind {
    missing,             // file or channel does not exist
    malformed,           // contents cannot be parsed
    dimension_mismatch,  // rasters of one record disagree in size
    out_of_range,        // a value cannot be represented by the codec
    io,                  // the OS refused a read or write
  };

  FileError(Kind kind, std::string path, const std::string& detail)
      : Error(path + ": " + detail), kind_(kind), path_(std::move(path)) {}

  Kind kind() const { return kind_; }
  const std::string& path() const { return path_; }

 private:
  Kind kind_;
  std::string path_;
};

}  // namespace stereoref
