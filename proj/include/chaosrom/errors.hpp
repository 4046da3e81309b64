#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace chaosrom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidModelError : public Error {
 public:
  using Error::Error;
};

// The integrated state left the finite reals (or a model blew up).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double time, Eigen::VectorXd state = {})
      : Error(what), time_(time), state_(std::move(state)) {}

  double time() const { return time_; }
  const Eigen::VectorXd& state() const { return state_; }

 private:
  double time_;
  Eigen::VectorXd state_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class KindMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace chaosrom
