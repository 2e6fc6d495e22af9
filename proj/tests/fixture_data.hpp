#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ehrsum/dataset.hpp"

namespace fixtures {

inline std::filesystem::path dir() { return EHRSUM_FIXTURES; }
inline std::filesystem::path whyqa_csv() { return dir() / "whyqa_fixtures.csv"; }

inline const std::string kLevoContext =
    "She was treated briefly with levofloxacin because of the gram-positive cocci in her sputum culture; however, "
    "her symptoms were felt to be consistent with a viral upper respiratory infection, and levofloxacin was "
    "continued at the time of discharge.";
inline const std::string kLevoQuestion = "Give me a summary on why she was treated briefly with levofloxacin?";
inline const std::string kLevoAnswer = "gram-positive cocci in her sputum culture";
// Found with an independent substring search over the sentence.
inline constexpr std::size_t kLevoAnswerBegin = 57;

inline const std::string kOpenIContext =
    "Lungs are clear. No pleural effusions or pneumothoraces. Heart and mediastinum of normal size and contour. "
    "Degenerative changes in the spine.";
inline const std::string kOpenIQuery = "Give me information about the lungs.";
inline const std::string kOpenISummary = "Lungs are otherwise clear";

inline ehrsum::dataset::WhyQARecord levo_record() {
  ehrsum::dataset::WhyQARecord r;
  r.file_name = "dc1";
  r.sentence_text = kLevoContext;
  r.cue = ehrsum::dataset::Cue::Because;
  r.derived_question = kLevoQuestion;
  r.answer = kLevoAnswer;
  r.answer_begin = kLevoAnswerBegin;
  r.question_anchor = ehrsum::dataset::QuestionAnchor::Medication;
  r.answer_reason_type = ehrsum::dataset::AnswerReasonType::ClinicalIndication;
  return r;
}

// Random valid record: a sentence of filler words containing the cue and an
// answer span at a known position. Optional non-ASCII words exercise
// code-point offsets.
inline ehrsum::dataset::WhyQARecord synthetic_record(std::mt19937_64& rng, const std::string& file_name,
                                                     bool unicode = false) {
  static const std::vector<std::string> words = {"patient", "was",  "given", "fluids", "pain",   "fever",
                                                 "stable",  "noted", "renal", "status", "levels", "cardiac"};
  static const std::vector<std::string> wide = {"caf\xC3\xA9", "na\xC3\xAFve", "\xCE\xB2-blocker", "d\xC3\xA9j\xC3\xA0"};
  auto pick = [&](std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
      if (!out.empty()) out += ' ';
      const bool w = unicode && rng() % 4 == 0;
      out += w ? wide[rng() % wide.size()] : words[rng() % words.size()];
    }
    return out;
  };
  ehrsum::dataset::WhyQARecord r;
  r.file_name = file_name;
  const bool because = rng() % 2 == 0;
  r.cue = because ? ehrsum::dataset::Cue::Because : ehrsum::dataset::Cue::DueTo;
  const std::string prefix = pick(1 + rng() % 6) + (because ? " because of " : " due to ");
  r.answer = pick(1 + rng() % 8);
  r.sentence_text = prefix + r.answer + " " + pick(rng() % 5) + ".";
  r.answer_begin = 0;
  for (unsigned char c : prefix)
    if ((c & 0xC0) != 0x80) ++r.answer_begin;
  r.derived_question = "Why was the " + pick(2) + "?";
  r.question_anchor = static_cast<ehrsum::dataset::QuestionAnchor>(rng() % 4);
  r.answer_reason_type = static_cast<ehrsum::dataset::AnswerReasonType>(rng() % 2);
  return r;
}

}  // namespace fixtures
