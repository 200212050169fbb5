#include "tilerl/kernel/actions.hpp"

#include <bit>

namespace tilerl::kernel {

namespace {

constexpr std::array<std::string_view, 7> kButtonNames = {"a",    "b",     "up",  "down",
                                                          "left", "right", "noop"};

}  // namespace

std::string_view to_string(Button b) { return kButtonNames[static_cast<std::size_t>(b)]; }

std::optional<Button> parse_button(std::string_view name) {
  for (std::size_t i = 0; i < kButtonNames.size(); ++i) {
    if (kButtonNames[i] == name) return static_cast<Button>(i);
  }
  return std::nullopt;
}

ActionSet::ActionSet(std::initializer_list<Button> buttons) {
  for (Button b : buttons) insert(b);
}

int ActionSet::size() const { return std::popcount(static_cast<unsigned>(mask_)); }

std::vector<Button> ActionSet::buttons() const {
  std::vector<Button> out;
  for (Button b : kAllButtons) {
    if (contains(b)) out.push_back(b);
  }
  return out;
}

std::string ActionSet::to_string() const {
  std::string s = "[";
  bool first = true;
  for (Button b : buttons()) {
    if (!first) s += ", ";
    first = false;
    s += '\'';
    s += kernel::to_string(b);
    s += '\'';
  }
  s += ']';
  return s;
}

Normalized normalize(ActionSet action) {
  if (action.contains(Button::Noop) && action.size() > 1) {
    action.erase(Button::Noop);
    return {action, true};
  }
  return {action, false};
}

std::string_view to_string(ActionSpace space) {
  switch (space) {
    case ActionSpace::Original:
      return "original";
    case ActionSpace::Engineered:
      return "engineered";
    case ActionSpace::Protocol:
      return "protocol";
  }
  return "?";
}

std::optional<ActionSpace> parse_action_space(std::string_view name) {
  if (name == "original") return ActionSpace::Original;
  if (name == "engineered") return ActionSpace::Engineered;
  if (name == "protocol") return ActionSpace::Protocol;
  return std::nullopt;
}

std::vector<ActionSet> enumerate_actions(ActionSpace space) {
  using enum Button;
  if (space == ActionSpace::Engineered) {
    return {
        ActionSet{Right},       ActionSet{Right, A},   ActionSet{Right, A, B},
        ActionSet{Left},        ActionSet{Left, A},    ActionSet{Right, B},
        ActionSet{Left, B},     ActionSet{A},
    };
  }
  // The protocol validator accepts exactly the original combinations: at most
  // two buttons, noop only on its own.
  constexpr std::array<Button, 6> pressable = {A, B, Up, Down, Left, Right};
  std::vector<ActionSet> out;
  out.push_back(ActionSet{Noop});
  for (Button b : pressable) out.push_back(ActionSet{b});
  for (std::size_t i = 0; i < pressable.size(); ++i) {
    for (std::size_t j = i + 1; j < pressable.size(); ++j) {
      out.push_back(ActionSet{pressable[i], pressable[j]});
    }
  }
  return out;
}

std::vector<std::string_view> engineered_action_names() {
  return {"RIGHT",        "RIGHT_JUMP",  "RIGHT_SPRINT_JUMP", "LEFT",
          "LEFT_JUMP",    "RIGHT_SPRINT", "LEFT_SPRINT",      "JUMP"};
}

bool is_engineered_triple(ActionSet action) {
  return action == ActionSet{Button::Right, Button::A, Button::B};
}

}  // namespace tilerl::kernel
