#include "ehrsum/prompting.hpp"

#include <array>
#include <cctype>
#include <iostream>

#include "ehrsum/text.hpp"

namespace ehrsum::prompting {
namespace {

constexpr std::array<std::string_view, 10> kKeywords = {"what",      "why",  "how",    "when", "which",
                                                        "who",       "summarize", "give", "inform", "tell"};

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

}  // namespace

bool starts_with_question_keyword(std::string_view s) {
  s = text::trim(s);
  std::size_t n = 0;
  while (n < s.size() && is_alpha(s[n])) ++n;
  const std::string word = text::to_lower_ascii(s.substr(0, n));
  for (auto k : kKeywords)
    if (word == k) return true;
  return false;
}

ClinicianQuery topic_to_question(std::string_view raw) {
  const std::string_view topic = text::trim(raw);
  if (topic.empty()) throw PromptError(PromptError::Kind::EmptyTopic, "EmptyTopic: clinician focus is blank");
  ClinicianQuery q;
  q.raw_topic = std::string(raw);
  if (topic.ends_with('?') || starts_with_question_keyword(topic)) {
    q.normalized_question = std::string(topic);
  } else {
    q.normalized_question = "What are the " + std::string(topic) + " for this patient?";
  }
  return q;
}

ModelInput format_model_input(std::string_view question, std::string_view context) {
  if (text::is_blank(question)) throw PromptError(PromptError::Kind::EmptyQuestion, "EmptyQuestion: question is blank");
  if (text::is_blank(context)) throw PromptError(PromptError::Kind::EmptyContext, "EmptyContext: context is blank");
  ModelInput in;
  in.question = std::string(question);
  in.context = std::string(context);
  in.text.reserve(kQuestionMarker.size() + question.size() + kContextMarker.size() + context.size());
  in.text.append(kQuestionMarker).append(question).append(kContextMarker).append(context);
  return in;
}

ParsedPrompt parse_model_input(std::string_view text) {
  if (!text.starts_with(kQuestionMarker)) {
    throw PromptError(PromptError::Kind::NotAPrompt, "NotAPrompt: missing \"question: \" prefix");
  }
  const auto split = text.find(kContextMarker, kQuestionMarker.size());
  if (split == std::string_view::npos) {
    throw PromptError(PromptError::Kind::NotAPrompt, "NotAPrompt: missing \" context: \" marker");
  }
  ParsedPrompt out;
  out.question = std::string(text.substr(kQuestionMarker.size(), split - kQuestionMarker.size()));
  out.context = std::string(text.substr(split + kContextMarker.size()));
  out.ambiguous = out.context.find(kContextMarker) != std::string::npos;
  if (out.ambiguous) {
    std::clog << "warning: prompt contains \" context: \" more than once; split at the first occurrence\n";
  }
  return out;
}

}  // namespace ehrsum::prompting
