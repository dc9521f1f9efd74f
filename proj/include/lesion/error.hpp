#pragma once

#include <stdexcept>
#include <string>

namespace lesion {

// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input, configuration or file contents. The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failures while computing (solver non-convergence, inference errors).
// The CLI maps these to exit code 2.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class MissingImage : public ValidationError {
 public:
  explicit MissingImage(std::string id);
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class DuplicateId : public ValidationError {
 public:
  explicit DuplicateId(std::string id);
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class UnreadableImage : public ValidationError {
 public:
  explicit UnreadableImage(std::string path);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class MissingLayer : public ValidationError {
 public:
  explicit MissingLayer(std::string name);
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

class SideMismatch : public ValidationError {
 public:
  SideMismatch(std::string image_id, int expected, int actual);
  const std::string& image_id() const noexcept { return image_id_; }

 private:
  std::string image_id_;
};

class MissingClass : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConvergenceError : public RuntimeFailure {
 public:
  ConvergenceError(const std::string& what, double residual);
  // KKT violation (SMO) or gradient infinity norm (Platt) at the last iterate.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace lesion
