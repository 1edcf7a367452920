#pragma once

#include <stdexcept>
#include <string>

namespace loramix {

enum class errc {
  malformed_header,
  overlapping_offsets,
  truncated_data,
  unknown_dtype,
  io_failure,
  invalid_tensor,
  unknown_module,
  shape_mismatch,
  missing_base_tensor,
  empty_spec,
  name_set_mismatch,
  empty_corpus,
  no_valid_lines,
  bad_role_sequence,
  bad_config,
};

const char * errc_name(errc code);

/// Single exception type for all library failures; `code()` tells callers
/// which contract was violated without string matching.
class error : public std::runtime_error {
public:
  error(errc code, const std::string & message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string & message) {
  throw error(code, message);
}

} // namespace loramix
