#include "tilerl/protocol/prompt.hpp"

#include <cctype>

#include "tilerl/error.hpp"

namespace tilerl::protocol {

namespace {

constexpr const char* kDefaultText =
    "You are playing Super Mario Land.\n"
    "\n"
    "The goal is to progress through levels, collect coins and power-ups when safe, and ultimately finish the game by rescuing Princess Daisy.\n"
    "\n"
    "You can control the game by pressing buttons on the Game Boy.\n"
    "\n"
    "Available buttons:\n"
    "{button_glossary}\n"
    "\n"
    "Please analyze the game screen and decide which buttons to press to progress.\n"
    "\n"
    "Return your answer as follows:\n"
    "1. Button sequence: a list of buttons to press simultaneously\n"
    "2. Each button should be one of: 'a', 'b', 'up', 'down', 'left', 'right', 'noop'\n"
    "\n"
    "First describe what you see on the screen in <perception></perception>. Then, in <reasoning></reasoning>, break down your reasoning step by step, justifying each action you consider. Output your final action in <answer>['button1', 'button2', ...]</answer>.\n"
    "\n"
    "The maximum number of buttons you can press simultaneously in one turn is {max_buttons}.";

constexpr const char* kDefaultGlossary =
    "- 'a': Jump (used to make Mario jump)\n"
    "- 'b': Run/Shoot (hold to run faster or shoot fireballs if available)\n"
    "- 'up': Climb ladders or vines (if present)\n"
    "- 'down': Crouch or enter pipes (when standing on a pipe)\n"
    "- 'left': Move Mario left\n"
    "- 'right': Move Mario right\n"
    "- 'noop': Do nothing (used to wait for a brief period without performing any action)";

bool is_name_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

}  // namespace

PromptTemplate default_template() {
  PromptTemplate t;
  t.text = kDefaultText;
  t.defaults = {{"max_buttons", "2"}, {"button_glossary", kDefaultGlossary}};
  return t;
}

std::vector<std::string> placeholders(const std::string& text) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < text.size() && is_name_char(text[j])) ++j;
    if (j < text.size() && text[j] == '}' && j > i + 1) names.push_back(text.substr(i + 1, j - i - 1));
  }
  return names;
}

std::string render_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> values = tpl.defaults;
  for (const auto& [k, v] : overrides) {
    if (!tpl.defaults.contains(k)) throw TemplateError("prompt has no placeholder '" + k + "'");
    values[k] = v;
  }
  std::string out;
  out.reserve(tpl.text.size() + 256);
  const std::string& s = tpl.text;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') {
      std::size_t j = i + 1;
      while (j < s.size() && is_name_char(s[j])) ++j;
      if (j < s.size() && s[j] == '}' && j > i + 1) {
        const std::string name = s.substr(i + 1, j - i - 1);
        auto it = values.find(name);
        if (it == values.end()) throw TemplateError("unresolved placeholder '{" + name + "}'");
        out += it->second;
        i = j;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

}  // namespace tilerl::protocol
