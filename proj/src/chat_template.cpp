#include "loramix/chat_template.hpp"

#include <cctype>

#include "loramix/errors.hpp"

namespace loramix {

namespace {

const char * role_name(role r) {
  switch (r) {
    case role::system:    return "system";
    case role::user:      return "user";
    case role::assistant: return "assistant";
  }
  return "?";
}

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

} // namespace

const char * template_id_name(template_id id) {
  return id == template_id::think ? "qwen3" : "qwen3_nothink";
}

template_id parse_template_id(const std::string & name) {
  if (name == "qwen3") return template_id::think;
  if (name == "qwen3_nothink") return template_id::nothink;
  fail(errc::bad_config, "unknown template id '" + name + "'");
}

bool is_nothink_template(const std::string & name) {
  return name == "qwen3_nothink";
}

std::string render(const std::vector<Message> & messages, template_id id,
                   bool add_generation_prompt) {
  if (messages.empty())
    fail(errc::bad_role_sequence, "message list is empty");

  std::size_t i = 0;
  if (messages[0].who == role::system) i = 1;
  role expected = role::user;
  for (; i < messages.size(); ++i) {
    if (messages[i].who != expected)
      fail(errc::bad_role_sequence,
           "expected " + std::string(role_name(expected)) + " at message " +
               std::to_string(i) + ", got " + role_name(messages[i].who));
    expected = expected == role::user ? role::assistant : role::user;
  }

  std::string out;
  for (const Message & m : messages) {
    out += "<|im_start|>";
    out += role_name(m.who);
    out += '\n';
    out += m.content;
    out += "<|im_end|>\n";
  }
  if (add_generation_prompt) {
    out += "<|im_start|>assistant\n";
    if (id == template_id::nothink) out += "<think>\n\n</think>\n\n";
  }
  return out;
}

StripResult strip_think(const std::string & text) {
  const std::string open = k_think_open;
  const std::string close = k_think_close;

  std::size_t start = 0;
  while (start < text.size() && is_space(text[start])) ++start;

  StripResult result;
  if (text.compare(start, open.size(), open) != 0) {
    result.answer = text;
    return result;
  }
  const std::size_t body = start + open.size();
  const std::size_t end = text.find(close, body);
  if (end == std::string::npos) {
    result.thought = text.substr(body);
    result.wellformed = false;
    return result;
  }
  result.thought = text.substr(body, end - body);
  std::size_t rest = end + close.size();
  while (rest < text.size() && is_space(text[rest])) ++rest;
  result.answer = text.substr(rest);
  return result;
}

bool contains_think_open(const std::string & text) {
  return text.find(k_think_open) != std::string::npos;
}

} // namespace loramix
