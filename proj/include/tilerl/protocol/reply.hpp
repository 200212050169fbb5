#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "tilerl/kernel/actions.hpp"

namespace tilerl::protocol {

struct AgentReply {
  std::string raw_text;
  std::optional<std::string> perception;
  std::optional<std::string> reasoning;
  std::optional<std::string> answer_raw;
};

// Total: never throws. For each tag the first complete span wins, i.e. the
// earliest closing tag paired with the nearest opening tag before it.
AgentReply parse_reply(std::string_view raw);

struct ValidationOptions {
  int max_buttons = 2;
  // Strict mode marks failures as episode-ending instead of falling back.
  bool strict = false;
};

struct ParsedDecision {
  kernel::ActionSet action{kernel::Button::Noop};
  bool normalized = false;     // noop dropped from a multi-button answer
  bool fallback_used = false;  // answer rejected; action is {noop}
  bool terminate = false;      // strict mode and the answer was rejected
  std::string reason;          // why the answer was rejected, empty otherwise
};

// Parses "['a', 'right']"-style lists. Quotes may be single or double;
// whitespace is ignored; case is folded. Never throws.
ParsedDecision validate_action(std::string_view answer_raw, const ValidationOptions& options = {});

// parse_reply then validate_action; a missing answer tag is a rejection.
ParsedDecision decide(std::string_view reply_text, const ValidationOptions& options = {});

// A conformant reply with all three tags populated, for scripted clients.
std::string format_reply(kernel::ActionSet action, std::string_view perception = "", std::string_view reasoning = "");

}  // namespace tilerl::protocol
