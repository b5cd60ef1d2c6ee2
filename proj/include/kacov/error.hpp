#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kacov {

enum class ErrorCode {
  invalid_argument,
  domain_mismatch,
  state_out_of_range,
  unbounded_domain,
  degenerate_chain,
  non_mixing_configuration,
  size_budget_exceeded,
  kernel_mismatch,
  rank_deficient,
  unconverged_sum,
  eigensolver_failure,
  not_self_adjoint,
  config_parse,
  io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kacov
