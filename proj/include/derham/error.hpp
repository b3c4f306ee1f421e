#pragma once

#include <stdexcept>
#include <string>

namespace derham {

enum class ErrorCode {
  invalid_argument,
  degenerate_element,
  non_manifold,
  duplicate_element,
  io,
  parse,
  cap_exceeded,
  incompatible_constraint,
  empty_space,
  trivial_range,
  non_nested,
  connectivity_mismatch,
  not_spd,
  compatibility_violation,
  numerical,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace derham
