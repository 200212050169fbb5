#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tilerl::kernel {

enum class Button : std::uint8_t { A = 0, B, Up, Down, Left, Right, Noop };

inline constexpr std::array<Button, 7> kAllButtons = {
    Button::A, Button::B, Button::Up, Button::Down, Button::Left, Button::Right, Button::Noop};

std::string_view to_string(Button b);
// Exact lowercase names only: "a", "b", "up", "down", "left", "right", "noop".
std::optional<Button> parse_button(std::string_view name);

// A set of simultaneously held buttons, stored as a bitmask.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  ActionSet(std::initializer_list<Button> buttons);

  static constexpr ActionSet from_mask(std::uint8_t mask) {
    ActionSet s;
    s.mask_ = mask & 0x7F;
    return s;
  }

  [[nodiscard]] constexpr bool contains(Button b) const {
    return (mask_ >> static_cast<unsigned>(b)) & 1U;
  }
  [[nodiscard]] int size() const;
  [[nodiscard]] constexpr bool empty() const { return mask_ == 0; }
  [[nodiscard]] constexpr std::uint8_t mask() const { return mask_; }

  void insert(Button b) { mask_ |= static_cast<std::uint8_t>(1U << static_cast<unsigned>(b)); }
  void erase(Button b) { mask_ &= static_cast<std::uint8_t>(~(1U << static_cast<unsigned>(b))); }

  // Buttons in canonical enum order.
  [[nodiscard]] std::vector<Button> buttons() const;
  // "['a', 'right']" in canonical order.
  [[nodiscard]] std::string to_string() const;

  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  std::uint8_t mask_ = 0;
};

struct Normalized {
  ActionSet action;
  bool changed = false;  // noop was dropped from a multi-button set
};

// noop alongside any other button collapses to the other buttons.
Normalized normalize(ActionSet action);

enum class ActionSpace { Original, Engineered, Protocol };

std::string_view to_string(ActionSpace space);
std::optional<ActionSpace> parse_action_space(std::string_view name);

// Stable ordering:
//  original/protocol: {noop}, the six singletons, then the fifteen pairs in
//  lexicographic enum order.
//  engineered: RIGHT, RIGHT_JUMP, RIGHT_SPRINT_JUMP, LEFT, LEFT_JUMP,
//  RIGHT_SPRINT, LEFT_SPRINT, JUMP.
std::vector<ActionSet> enumerate_actions(ActionSpace space);

std::vector<std::string_view> engineered_action_names();

// True for the 3-button engineered combination {right, a, b}.
bool is_engineered_triple(ActionSet action);

}  // namespace tilerl::kernel
