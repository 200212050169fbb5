#include "tilerl/protocol/reply.hpp"

#include <cctype>
#include <vector>

namespace tilerl::protocol {

namespace {

std::optional<std::string> first_span(std::string_view s, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  std::size_t from = 0;
  while (true) {
    const std::size_t c = s.find(close, from);
    if (c == std::string_view::npos) return std::nullopt;
    const std::size_t o = s.rfind(open, c);
    // rfind can return an opening that overlaps a previous close; any
    // opening strictly before c works.
    if (o != std::string_view::npos && o + open.size() <= c) {
      return std::string(s.substr(o + open.size(), c - o - open.size()));
    }
    from = c + close.size();
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

ParsedDecision reject(std::string reason, const ValidationOptions& options) {
  ParsedDecision d;
  d.fallback_used = true;
  d.terminate = options.strict;
  d.reason = std::move(reason);
  return d;
}

}  // namespace

AgentReply parse_reply(std::string_view raw) {
  AgentReply r;
  r.raw_text = std::string(raw);
  r.perception = first_span(raw, "perception");
  r.reasoning = first_span(raw, "reasoning");
  r.answer_raw = first_span(raw, "answer");
  return r;
}

ParsedDecision validate_action(std::string_view answer_raw, const ValidationOptions& options) {
  std::string_view s = trim(answer_raw);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') return reject("answer is not a bracketed list", options);
  s = trim(s.substr(1, s.size() - 2));
  if (s.empty()) return reject("empty button list", options);

  std::vector<kernel::Button> buttons;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string_view::npos) comma = s.size();
    std::string_view item = trim(s.substr(pos, comma - pos));
    if (item.size() < 2 || (item.front() != '\'' && item.front() != '"') || item.back() != item.front()) {
      return reject("list item is not a quoted button name", options);
    }
    item = trim(item.substr(1, item.size() - 2));
    std::string lower;
    for (char c : item) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto b = kernel::parse_button(lower);
    if (!b) return reject("unknown button '" + lower + "'", options);
    bool dup = false;
    for (auto x : buttons) dup = dup || x == *b;
    if (!dup) buttons.push_back(*b);
    pos = comma + 1;
    if (comma == s.size()) break;
  }

  kernel::ActionSet set;
  for (auto b : buttons) set.insert(b);
  auto norm = kernel::normalize(set);
  if (static_cast<int>(norm.action.size()) > options.max_buttons) {
    return reject("more than " + std::to_string(options.max_buttons) + " buttons", options);
  }
  ParsedDecision d;
  d.action = norm.action;
  d.normalized = norm.changed;
  return d;
}

ParsedDecision decide(std::string_view reply_text, const ValidationOptions& options) {
  const AgentReply r = parse_reply(reply_text);
  if (!r.answer_raw) return reject("no <answer> span", options);
  return validate_action(*r.answer_raw, options);
}

std::string format_reply(kernel::ActionSet action, std::string_view perception, std::string_view reasoning) {
  std::string out = "<perception>";
  out += perception.empty() ? "The agent stands on the ground." : perception;
  out += "</perception>\n<reasoning>";
  out += reasoning.empty() ? "Keep moving toward the goal." : reasoning;
  out += "</reasoning>\n<answer>" + action.to_string() + "</answer>";
  return out;
}

}  // namespace tilerl::protocol
