#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evoagent {

enum class Errc {
  invalid_argument,
  duplicate_id,
  missing_binding,
  invalid_invocation,
  unknown_page,
  unknown_node,
  unknown_element,
  empty_steps,
  non_normalized,
  dimension_mismatch,
  empty_descriptor,
  malformed_record,
  referential_integrity,
  missing_fixture,
  payload_shape,
  empty_list,
  slice_too_short,
  broken_chain,
  unknown_id,
  transport,
  parse,
  validation,
  length_mismatch,
  zero_variance,
  suite_mismatch,
  precondition,
  io,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Carries every problem found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems);

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace evoagent
