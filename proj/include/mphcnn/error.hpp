#pragma once

#include <stdexcept>
#include <string>

namespace mphcnn {

/// Root of every error raised by the library.
class error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class dimension_error : public error {
  public:
    using error::error;
};

/// A document whose mask selects no positions.
class degenerate_document_error : public error {
  public:
    using error::error;
};

/// Backward pass requested on something the tape did not record.
class graph_error : public error {
  public:
    using error::error;
};

class optimizer_error : public error {
  public:
    using error::error;
};

/// Invalid configuration or command-line usage (exit code 1).
class config_error : public error {
  public:
    using error::error;
};

/// Malformed or inconsistent input data (exit code 2).
class data_error : public error {
  public:
    using error::error;
};

/// Two score or metric collections that do not cover the same keys.
class alignment_error : public data_error {
  public:
    using data_error::data_error;
};

/// NaN or Inf produced during a forward or backward pass (exit code 3).
class numeric_error : public error {
  public:
    using error::error;
};

}  // namespace mphcnn
