#pragma once

namespace loramix {

inline constexpr const char * k_tool_name = "loramix";
inline constexpr const char * k_tool_version = "0.1.0";

} // namespace loramix
