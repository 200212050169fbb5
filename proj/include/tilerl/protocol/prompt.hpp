#pragma once

#include <map>
#include <string>
#include <vector>

namespace tilerl::protocol {

// Template text with {name} placeholders and their default values.
struct PromptTemplate {
  std::string text;
  std::map<std::string, std::string> defaults;
};

// Placeholders: max_buttons, button_glossary.
PromptTemplate default_template();

// Names of every {name} placeholder in order of appearance.
std::vector<std::string> placeholders(const std::string& text);

// Substitutes defaults, then overrides. Throws TemplateError for a
// placeholder with no value or an override naming no placeholder.
std::string render_prompt(const PromptTemplate& tpl, const std::map<std::string, std::string>& overrides = {});

}  // namespace tilerl::protocol
