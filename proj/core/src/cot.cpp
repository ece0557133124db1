#include "motive/cot.hpp"

namespace motive {

namespace {
constexpr auto npos = std::string_view::npos;

bool contains_open_tag(std::string_view body) {
  return body.find(kThinkOpen) != npos || body.find(kAnswerOpen) != npos;
}
}  // namespace

std::string_view cot_status_name(CotStatus s) {
  switch (s) {
    case CotStatus::Ok: return "ok";
    case CotStatus::MissingThink: return "missing_think";
    case CotStatus::MissingAnswer: return "missing_answer";
    case CotStatus::AnswerBeforeThink: return "answer_before_think";
    case CotStatus::UnclosedTag: return "unclosed_tag";
  }
  return "unknown";
}

CotParse parse_cot(std::string_view text) {
  CotParse out;
  const auto pt = text.find(kThinkOpen);
  const auto pa = text.find(kAnswerOpen);
  if (pa != npos && (pt == npos || pa < pt)) {
    out.status = CotStatus::AnswerBeforeThink;
    return out;
  }
  if (pt == npos) {
    out.status = CotStatus::MissingThink;
    return out;
  }
  const auto think_body_at = pt + kThinkOpen.size();
  const auto ct = text.find(kThinkClose, think_body_at);
  if (ct == npos) {
    out.status = CotStatus::UnclosedTag;
    return out;
  }
  const auto think = text.substr(think_body_at, ct - think_body_at);
  // A second opening tag before the close means the first think block never
  // ended; nested or interleaved blocks are rejected rather than rescanned.
  if (contains_open_tag(think)) {
    out.status = CotStatus::UnclosedTag;
    return out;
  }
  const auto qa = text.find(kAnswerOpen, ct + kThinkClose.size());
  if (qa == npos) {
    out.status = CotStatus::MissingAnswer;
    return out;
  }
  const auto answer_body_at = qa + kAnswerOpen.size();
  const auto ca = text.find(kAnswerClose, answer_body_at);
  if (ca == npos) {
    out.status = CotStatus::UnclosedTag;
    return out;
  }
  const auto answer = text.substr(answer_body_at, ca - answer_body_at);
  if (contains_open_tag(answer)) {
    out.status = CotStatus::UnclosedTag;
    return out;
  }
  out.status = CotStatus::Ok;
  out.think.assign(think);
  out.answer.assign(answer);
  return out;
}

std::string format_cot(std::string_view think, std::string_view answer) {
  std::string out;
  out.reserve(think.size() + answer.size() + kThinkOpen.size() + kThinkClose.size() +
              kAnswerOpen.size() + kAnswerClose.size());
  out.append(kThinkOpen);
  out.append(think);
  out.append(kThinkClose);
  out.append(kAnswerOpen);
  out.append(answer);
  out.append(kAnswerClose);
  return out;
}

}  // namespace motive
