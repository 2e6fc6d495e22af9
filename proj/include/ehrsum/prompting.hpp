#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ehrsum::prompting {

inline constexpr std::string_view kQuestionMarker = "question: ";
inline constexpr std::string_view kContextMarker = " context: ";

class PromptError : public std::invalid_argument {
 public:
  enum class Kind { EmptyTopic, EmptyQuestion, EmptyContext, NotAPrompt };

  PromptError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ClinicianQuery {
  std::string raw_topic;
  std::string normalized_question;
};

// Full questions and imperative requests pass through (trimmed); bare topics
// are wrapped as "What are the {topic} for this patient?".
ClinicianQuery topic_to_question(std::string_view raw);

// True when the leading word is one of the recognised question or request
// keywords (what, why, how, when, which, who, summarize, give, inform, tell).
bool starts_with_question_keyword(std::string_view s);

struct ModelInput {
  std::string text;
  std::string question;
  std::string context;
};

// text == "question: " + question + " context: " + context, nothing else touched.
ModelInput format_model_input(std::string_view question, std::string_view context);

struct ParsedPrompt {
  std::string question;
  std::string context;
  // Set when the context still contains the marker, i.e. the split point
  // was one of several candidates.
  bool ambiguous = false;
};

// Splits at the first " context: " following the "question: " prefix.
ParsedPrompt parse_model_input(std::string_view text);

}  // namespace ehrsum::prompting
