#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tilerl/kernel/observation.hpp"

namespace tilerl::protocol {

inline constexpr int kWireSchemaVersion = 1;

struct TurnMeta {
  std::int64_t turn_index = 0;
  std::string level_id;
  std::string session_id;
};

// One observation sent to a remote policy. The image travels as PNG bytes,
// base64-encoded inside the JSON envelope.
struct ObservationPayload {
  int schema_version = kWireSchemaVersion;
  std::string prompt;
  std::string image_png;
  int width = 0;
  int height = 0;
  TurnMeta meta;
};

struct ReplyEnvelope {
  int schema_version = kWireSchemaVersion;
  std::string reply_text;
};

// End-of-session notice from serve-env, sent instead of the next observation.
struct SessionEnd {
  int schema_version = kWireSchemaVersion;
  std::string session_id;
  std::string reason;  // finished | died | truncated | strict_reject
  std::int64_t turns = 0;
  double progress = 0.0;
  std::int64_t fallbacks = 0;
};

// Throws ValidationError for a zero-sized frame.
ObservationPayload encode_observation(const kernel::PixelFrame& frame, const TurnMeta& meta, const std::string& prompt);
kernel::PixelFrame decode_observation(const ObservationPayload& payload);

// Single-line JSON. Decoders throw SchemaError on a missing field, a wrong
// type or a schema_version other than kWireSchemaVersion.
std::string to_json(const ObservationPayload& p);
std::string to_json(const ReplyEnvelope& r);
std::string to_json(const SessionEnd& e);
ObservationPayload observation_from_json(const std::string& text);
ReplyEnvelope reply_from_json(const std::string& text);
SessionEnd session_end_from_json(const std::string& text);
// True when the JSON object is a SessionEnd rather than an observation.
bool is_session_end(const std::string& text);

std::string base64_encode(const std::string& bytes);
std::string base64_decode(const std::string& text);

}  // namespace tilerl::protocol
