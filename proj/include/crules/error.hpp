#pragma once

#include <stdexcept>
#include <string>

namespace crules {

enum class Errc {
  missing_column,
  non_binary_treatment,
  unparseable_cell,
  constant_column,
  unknown_literal,
  insufficient_units,
  all_treated_or_all_control,
  score_out_of_range,
  min_support_violated,
  no_feasible_rule,
  empty_input,
  length_mismatch,
  all_truth_zero,
  search_space_too_large,
  schema_mismatch,
  bad_config,
  io_error,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace crules
