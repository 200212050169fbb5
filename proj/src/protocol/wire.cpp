#include "tilerl/protocol/wire.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include "tilerl/error.hpp"
#include "tilerl/protocol/png.hpp"

namespace tilerl::protocol {

namespace {

using nlohmann::json;

json parse_envelope(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("envelope is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("envelope is not a JSON object");
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    throw SchemaError("envelope lacks an integer schema_version");
  }
  const int v = j["schema_version"].get<int>();
  if (v != kWireSchemaVersion) {
    throw SchemaError("schema_version " + std::to_string(v) + " not supported (expected " + std::to_string(kWireSchemaVersion) + ")");
  }
  return j;
}

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw SchemaError(std::string("envelope lacks '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("envelope field '") + name + "' has the wrong type");
  }
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw SchemaError("base64 length is not a multiple of 4");
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw SchemaError("invalid base64");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

ObservationPayload encode_observation(const kernel::PixelFrame& frame, const TurnMeta& meta, const std::string& prompt) {
  if (frame.width <= 0 || frame.height <= 0) throw ValidationError("cannot encode a zero-sized frame");
  ObservationPayload p;
  p.prompt = prompt;
  p.image_png = encode_png(frame);
  p.width = frame.width;
  p.height = frame.height;
  p.meta = meta;
  return p;
}

kernel::PixelFrame decode_observation(const ObservationPayload& payload) {
  auto f = decode_png(payload.image_png);
  if (f.width != payload.width || f.height != payload.height) throw SchemaError("image dimensions disagree with the envelope");
  return f;
}

std::string to_json(const ObservationPayload& p) {
  json j{{"schema_version", p.schema_version}, {"prompt", p.prompt}, {"image", base64_encode(p.image_png)},
         {"image_format", "png"}, {"width", p.width}, {"height", p.height}, {"turn_index", p.meta.turn_index},
         {"level_id", p.meta.level_id}};
  if (!p.meta.session_id.empty()) j["session_id"] = p.meta.session_id;
  return j.dump();
}

std::string to_json(const ReplyEnvelope& r) { return json{{"schema_version", r.schema_version}, {"reply_text", r.reply_text}}.dump(); }

std::string to_json(const SessionEnd& e) {
  return json{{"schema_version", e.schema_version}, {"done", true}, {"session_id", e.session_id}, {"reason", e.reason},
              {"turns", e.turns}, {"progress", e.progress}, {"fallbacks", e.fallbacks}}
      .dump();
}

ObservationPayload observation_from_json(const std::string& text) {
  const json j = parse_envelope(text);
  ObservationPayload p;
  p.prompt = field<std::string>(j, "prompt");
  p.image_png = base64_decode(field<std::string>(j, "image"));
  p.width = field<int>(j, "width");
  p.height = field<int>(j, "height");
  p.meta.turn_index = field<std::int64_t>(j, "turn_index");
  p.meta.level_id = field<std::string>(j, "level_id");
  if (j.contains("session_id")) p.meta.session_id = field<std::string>(j, "session_id");
  return p;
}

ReplyEnvelope reply_from_json(const std::string& text) {
  const json j = parse_envelope(text);
  ReplyEnvelope r;
  r.reply_text = field<std::string>(j, "reply_text");
  return r;
}

SessionEnd session_end_from_json(const std::string& text) {
  const json j = parse_envelope(text);
  SessionEnd e;
  e.session_id = field<std::string>(j, "session_id");
  e.reason = field<std::string>(j, "reason");
  e.turns = field<std::int64_t>(j, "turns");
  e.progress = field<double>(j, "progress");
  e.fallbacks = field<std::int64_t>(j, "fallbacks");
  return e;
}

bool is_session_end(const std::string& text) {
  const json j = parse_envelope(text);
  return j.contains("done") && j["done"].is_boolean() && j["done"].get<bool>();
}

}  // namespace tilerl::protocol
