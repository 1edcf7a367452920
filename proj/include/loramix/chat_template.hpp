#pragma once

#include <string>
#include <vector>

namespace loramix {

enum class role { system, user, assistant };

struct Message {
  role who = role::user;
  std::string content;
};

// "qwen3" renders plain ChatML; "qwen3_nothink" additionally pre-fills an
// empty think block after the generation prompt to suppress reasoning.
enum class template_id { think, nothink };

const char * template_id_name(template_id id);
template_id parse_template_id(const std::string & name);
bool is_nothink_template(const std::string & name);

inline constexpr const char * k_think_open = "<think>";
inline constexpr const char * k_think_close = "</think>";

// Per message: "<|im_start|>{role}\n{content}<|im_end|>\n". Requires an
// optional leading system message followed by alternating user/assistant
// starting with user.
std::string render(const std::vector<Message> & messages, template_id id,
                   bool add_generation_prompt);

struct StripResult {
  std::string thought;
  std::string answer;
  bool wellformed = true;
};

// Splits a leading think block off a generation. Only the first block
// counts; later tags stay in the answer verbatim.
StripResult strip_think(const std::string & text);

bool contains_think_open(const std::string & text);

} // namespace loramix
