#pragma once

#include <stdexcept>
#include <string>

namespace avo {

/// Wrong vector/matrix length for the arm or image at hand.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the operation's domain (joint limits, empty input, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed file or config. `where` carries a line number or byte offset.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string where = {})
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Histogram filtering could not produce the requested number of clusters.
class ClusterCountError : public std::runtime_error {
 public:
  ClusterCountError(int requested, int achievable);
  int requested() const noexcept { return requested_; }
  int achievable() const noexcept { return achievable_; }

 private:
  int requested_;
  int achievable_;
};

/// OBB fit on a cloud whose scatter matrix is rank deficient.
class DegenerateCloudError : public std::runtime_error {
 public:
  explicit DegenerateCloudError(int rank);
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// Inverse kinematics failure. `residual` is the best position error reached (mm).
class IkError : public std::runtime_error {
 public:
  enum class Kind { kOutOfReach, kNoConvergence };
  IkError(Kind kind, double residual, const std::string& what)
      : std::runtime_error(what), kind_(kind), residual_(residual) {}
  Kind kind() const noexcept { return kind_; }
  double residual() const noexcept { return residual_; }

 private:
  Kind kind_;
  double residual_;
};

/// Motion planning failure (blocked trajectory, no base translation found).
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Harvest state machine asked to perform a transition it does not allow.
class StateMachineError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Perception pipeline failure, tagged with the stage that raised it.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace avo
