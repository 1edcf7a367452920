#include "loramix/errors.hpp"

namespace loramix {

const char * errc_name(errc code) {
  switch (code) {
    case errc::malformed_header:    return "MalformedHeader";
    case errc::overlapping_offsets: return "OverlappingOffsets";
    case errc::truncated_data:      return "TruncatedData";
    case errc::unknown_dtype:       return "UnknownDtype";
    case errc::io_failure:          return "IoFailure";
    case errc::invalid_tensor:      return "InvalidTensor";
    case errc::unknown_module:      return "UnknownModule";
    case errc::shape_mismatch:      return "ShapeMismatch";
    case errc::missing_base_tensor: return "MissingBaseTensor";
    case errc::empty_spec:          return "EmptySpec";
    case errc::name_set_mismatch:   return "NameSetMismatch";
    case errc::empty_corpus:        return "EmptyCorpus";
    case errc::no_valid_lines:      return "NoValidLines";
    case errc::bad_role_sequence:   return "BadRoleSequence";
    case errc::bad_config:          return "BadConfig";
  }
  return "UnknownError";
}

} // namespace loramix
