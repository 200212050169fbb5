#include <doctest.h>

#include <random>
#include <set>

#include "tilerl/error.hpp"
#include "tilerl/kernel/actions.hpp"
#include "tilerl/kernel/level.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/kernel/world.hpp"
#include "tilerl/protocol/png.hpp"
#include "tilerl/protocol/prompt.hpp"
#include "tilerl/protocol/reply.hpp"
#include "tilerl/protocol/wire.hpp"

using namespace tilerl;
using namespace tilerl::protocol;

namespace {

// Brute force over every (open, close) pair: the smallest close position that
// has some opening strictly before it, and the last such opening.
std::optional<std::string> reference_span(const std::string& s, const std::string& tag) {
  const std::string open = "<" + tag + ">", close = "</" + tag + ">";
  for (std::size_t c = 0; c + close.size() <= s.size(); ++c) {
    if (s.compare(c, close.size(), close) != 0) continue;
    std::optional<std::size_t> best;
    for (std::size_t o = 0; o + open.size() <= c; ++o) {
      if (s.compare(o, open.size(), open) == 0) best = o;
    }
    if (best) return s.substr(*best + open.size(), c - *best - open.size());
  }
  return std::nullopt;
}

std::string fuzz_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "<answer>", "</answer>", "<perception>", "</perception>", "<reasoning>", "</reasoning>", "<answer",
      "</ans", ">", "<", "['a', 'right']", "['noop']", "x", " ", "\n", "['b','up','left']", "\"right\"", "]", "[", "'",
      std::string("\0", 1), "\xff\xfe"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> n(0, 14);
  std::string s;
  const int k = n(rng);
  for (int i = 0; i < k; ++i) s += pieces[pick(rng)];
  return s;
}

}  // namespace

TEST_CASE("parse_reply extracts the three tags") {
  const auto r = parse_reply("blah <perception>p</perception> <reasoning>r</reasoning><answer>['a', 'right']</answer> tail");
  CHECK(r.perception == "p");
  CHECK(r.reasoning == "r");
  CHECK(r.answer_raw == "['a', 'right']");
  const auto e = parse_reply("");
  CHECK_FALSE(e.perception.has_value());
  CHECK_FALSE(e.reasoning.has_value());
  CHECK_FALSE(e.answer_raw.has_value());
}

TEST_CASE("duplicated and nested answer tags: first complete span wins") {
  CHECK(parse_reply("<answer>['a']</answer><answer>['b']</answer>").answer_raw == "['a']");
  CHECK(parse_reply("<answer>x<answer>['b']</answer></answer>").answer_raw == "['b']");
  CHECK(parse_reply("</answer><answer>['up']</answer>").answer_raw == "['up']");
  CHECK_FALSE(parse_reply("<answer>['a']").answer_raw.has_value());
}

TEST_CASE("parse_reply agrees with a brute-force reference on a fuzz corpus") {
  std::mt19937_64 rng(4242);
  for (int i = 0; i < 20000; ++i) {
    const auto text = fuzz_text(rng);
    const auto r = parse_reply(text);
    CHECK(r.answer_raw == reference_span(text, "answer"));
    CHECK(r.perception == reference_span(text, "perception"));
    CHECK(r.reasoning == reference_span(text, "reasoning"));
  }
}

TEST_CASE("validation is total and sound on arbitrary bytes") {
  const auto valid = kernel::enumerate_actions(kernel::ActionSpace::Protocol);
  const std::set<std::uint8_t> masks = [&] {
    std::set<std::uint8_t> m;
    for (auto a : valid) m.insert(a.mask());
    return m;
  }();
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 40);
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) s += static_cast<char>(byte(rng));
    const auto d = decide(s);
    CHECK(masks.count(d.action.mask()) == 1);
    const auto f = decide("<answer>" + fuzz_text(rng) + "</answer>");
    CHECK(masks.count(f.action.mask()) == 1);
  }
}

TEST_CASE("validate_action examples") {
  const auto ok = validate_action("['a', 'right']");
  CHECK((ok.action == kernel::ActionSet{kernel::Button::A, kernel::Button::Right}));
  CHECK_FALSE(ok.normalized);
  CHECK_FALSE(ok.fallback_used);

  const auto three = validate_action("['a','b','right']");
  CHECK(three.fallback_used);
  CHECK(three.action == kernel::ActionSet{kernel::Button::Noop});
  CHECK_FALSE(three.reason.empty());

  const auto norm = validate_action("['noop','right']");
  CHECK(norm.action == kernel::ActionSet{kernel::Button::Right});
  CHECK(norm.normalized);

  CHECK(validate_action(" [ \"RIGHT\" , 'a' ] ").action == (kernel::ActionSet{kernel::Button::A, kernel::Button::Right}));
  CHECK(validate_action("['a', 'a']").action == kernel::ActionSet{kernel::Button::A});
  CHECK(validate_action("['start']").fallback_used);
  CHECK(validate_action("[]").fallback_used);
  CHECK(validate_action("right").fallback_used);
  CHECK(validate_action("['a', 'b']", ValidationOptions{1, false}).fallback_used);

  const auto strict = decide("no tags at all", ValidationOptions{2, true});
  CHECK(strict.fallback_used);
  CHECK(strict.terminate);
}

TEST_CASE("format_reply produces a conformant reply for every protocol action") {
  for (auto a : kernel::enumerate_actions(kernel::ActionSpace::Protocol)) {
    const auto d = decide(format_reply(a));
    CHECK_FALSE(d.fallback_used);
    CHECK(d.action == a);
  }
}

TEST_CASE("default prompt renders the button cap sentence") {
  const auto text = render_prompt(default_template());
  CHECK(text.find("The maximum number of buttons you can press simultaneously in one turn is 2") != std::string::npos);
  const auto one = render_prompt(default_template(), {{"max_buttons", "1"}});
  CHECK(one.find("in one turn is 1") != std::string::npos);
  CHECK(placeholders(default_template().text) == std::vector<std::string>{"button_glossary", "max_buttons"});
}

TEST_CASE("prompt template errors") {
  CHECK_THROWS_AS(render_prompt(PromptTemplate{"hello {who}", {}}), TemplateError);
  CHECK_THROWS_AS(render_prompt(default_template(), {{"colour", "red"}}), TemplateError);
  CHECK(render_prompt(PromptTemplate{"hello {who}", {{"who", "you"}}}) == "hello you");
}

TEST_CASE("png roundtrip is lossless and checks its CRC") {
  const auto& levels = kernel::LevelSet::builtin();
  auto w = kernel::reset(levels, {1, 1}, 3);
  for (int i = 0; i < 6; ++i) kernel::step(w, {kernel::Button::Right, kernel::Button::A});
  const auto frame = kernel::render(w, 2);
  const auto png = encode_png(frame);
  CHECK(png.substr(1, 3) == "PNG");
  CHECK(decode_png(png) == frame);
  auto broken = png;
  broken[broken.size() / 2] ^= 0x5A;
  CHECK_THROWS_AS(decode_png(broken), SchemaError);
  CHECK_THROWS_AS(decode_png("not a png"), SchemaError);
}

TEST_CASE("observation envelope: default size, roundtrip, schema checks") {
  const auto& levels = kernel::LevelSet::builtin();
  auto w = kernel::reset(levels, {1, 1}, 0);
  const auto frame = kernel::render(w, kernel::kDefaultUpsample);
  const auto p = encode_observation(frame, {4, "1-1", "s0"}, "prompt text");
  CHECK(p.width == 1280);
  CHECK(p.height == 1152);
  CHECK(p.schema_version == kWireSchemaVersion);
  const auto json = to_json(p);
  CHECK(json.find('\n') == std::string::npos);
  const auto back = observation_from_json(json);
  CHECK(back.meta.turn_index == 4);
  CHECK(back.meta.level_id == "1-1");
  CHECK(back.prompt == "prompt text");
  CHECK(decode_observation(back) == frame);
  CHECK_FALSE(is_session_end(json));

  CHECK_THROWS_AS(encode_observation(kernel::PixelFrame{}, {}, ""), ValidationError);
  CHECK_THROWS_AS(reply_from_json(R"({"schema_version":2,"reply_text":"x"})"), SchemaError);
  CHECK_THROWS_AS(reply_from_json(R"({"schema_version":1})"), SchemaError);
  CHECK_THROWS_AS(reply_from_json(R"({"schema_version":1,"reply_text":5})"), SchemaError);
  CHECK_THROWS_AS(reply_from_json("not json"), SchemaError);
  CHECK(reply_from_json(to_json(ReplyEnvelope{1, "<answer>['a']</answer>"})).reply_text == "<answer>['a']</answer>");

  SessionEnd e{1, "s3", "finished", 12, 33.5, 1};
  const auto ej = to_json(e);
  CHECK(is_session_end(ej));
  const auto eb = session_end_from_json(ej);
  CHECK(eb.reason == "finished");
  CHECK(eb.turns == 12);
  CHECK(eb.progress == 33.5);
}

TEST_CASE("base64 roundtrip on every length mod 3") {
  std::string all;
  for (int i = 0; i < 256; ++i) all += static_cast<char>(i);
  for (std::size_t n : {0UL, 1UL, 2UL, 3UL, 4UL, 255UL, 256UL}) {
    const auto s = all.substr(0, n);
    CHECK(base64_decode(base64_encode(s)) == s);
  }
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_encode("fo") == "Zm8=");
}
