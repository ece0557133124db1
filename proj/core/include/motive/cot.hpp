#pragma once

#include <string>
#include <string_view>

namespace motive {

inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

enum class CotStatus {
  Ok,
  MissingThink,
  MissingAnswer,
  AnswerBeforeThink,
  UnclosedTag,
};

std::string_view cot_status_name(CotStatus s);

struct CotParse {
  CotStatus status = CotStatus::MissingThink;
  std::string think;
  std::string answer;

  bool ok() const { return status == CotStatus::Ok; }
};

/// Single left-to-right scan over the generated text. Accepts exactly the
/// well-formed shape: optional preamble, <think>...</think>, optional
/// filler, <answer>...</answer>, trailing text ignored. Opening tags are
/// forbidden inside either body (no nesting, no reordering); stray closing
/// tags in a body are treated as plain text.
CotParse parse_cot(std::string_view text);

/// Inverse of parse_cot for well-formed output: wraps the two payloads in
/// their tags with no padding.
std::string format_cot(std::string_view think, std::string_view answer);

}  // namespace motive
