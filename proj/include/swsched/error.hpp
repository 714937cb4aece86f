#pragma once

#include <stdexcept>
#include <string>

namespace swsched {

/// Base class of every error raised by the compiler, planner and simulator.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed IR construction or an illegal schedule primitive.
class IrError : public Error {
 public:
  using Error::Error;
};

/// Workload or expression text that cannot be parsed or validated.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The minimal tile footprint does not fit the scratchpad.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Internal inconsistency between schedule annotations (e.g. a buffered
/// variable encountered among the outer loops during DMA insertion).
class ScheduleError : public Error {
 public:
  using Error::Error;
};

class SimulationError : public Error {
 public:
  enum class Kind { scratchpad_overflow, invalid_read, write_conflict, bad_plan, shape_mismatch };

  SimulationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace swsched
