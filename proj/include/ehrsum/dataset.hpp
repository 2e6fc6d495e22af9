#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ehrsum::dataset {

enum class Cue { Because, DueTo };
enum class QuestionAnchor { Medication, Avoidance, Procedure, Disposition };
enum class AnswerReasonType { AdverseEffect, ClinicalIndication };

std::string_view to_string(Cue cue);
std::string_view to_string(QuestionAnchor anchor);
std::string_view to_string(AnswerReasonType reason);

// Literal text of the cue as it appears in clinical sentences.
std::string_view cue_phrase(Cue cue);

// One annotated Why-QA sentence. answer_begin counts code points.
struct WhyQARecord {
  std::string file_name;
  std::string sentence_text;
  Cue cue = Cue::Because;
  std::string derived_question;
  std::string answer;
  std::size_t answer_begin = 0;
  QuestionAnchor question_anchor = QuestionAnchor::Medication;
  AnswerReasonType answer_reason_type = AnswerReasonType::ClinicalIndication;

  bool operator==(const WhyQARecord&) const = default;
};

// Header names of the annotation table, in canonical order.
inline constexpr std::string_view kColumns[] = {
    "FileName", "SentenceText", "WhyQACue", "DerivedQuestion",
    "Answer",   "AnswerBegin",  "QuestionAnchor", "AnswerReasonType"};

enum class TableFormat { Csv, Tsv };

class TableError : public std::runtime_error {
 public:
  enum class Kind { MissingColumn, BadOffset, EmptyField, BadValue, Malformed };

  TableError(Kind kind, std::size_t row, std::string column, const std::string& detail);

  Kind kind() const { return kind_; }
  // Spreadsheet numbering: the header is row 1.
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  Kind kind_;
  std::size_t row_;
  std::string column_;
};

// Reads an annotation table. Columns may appear in any order; extra columns
// are ignored. Enum cells are matched case-insensitively and tolerate
// spaces, underscores and hyphens ("due to", "DueTo", "adverse_effect").
std::vector<WhyQARecord> parse_whyqa_table(std::istream& source, TableFormat format);

// Picks TSV for a ".tsv" extension, CSV otherwise.
std::vector<WhyQARecord> read_whyqa_file(const std::filesystem::path& path);

// Serialises records back to a delimited table with the canonical header.
void write_whyqa_table(std::ostream& out, std::span<const WhyQARecord> records, TableFormat format);

struct Violation {
  enum class Kind { OffsetMismatch, CueNotFound, EmptyQuestion, EmptyAnswer };
  Kind kind;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(Violation::Kind kind) const;
};

ValidationResult validate_record(const WhyQARecord& record);

// Moves answer_begin to the first occurrence of the answer in the sentence.
// nullopt means the answer does not occur and the record must be dropped.
std::optional<WhyQARecord> repair_offset(const WhyQARecord& record);

struct DroppedRecord {
  std::size_t index;  // position in the input list
  WhyQARecord record;
  std::string reason;
};

struct PreparedRecords {
  std::vector<WhyQARecord> kept;
  std::vector<DroppedRecord> dropped;
  std::size_t repaired = 0;
};

// Validates every record, repairs offset mismatches, and drops whatever
// still fails. Callers are expected to log `dropped`.
PreparedRecords prepare_records(std::span<const WhyQARecord> records);

struct SquadAnswer {
  std::string text;
  std::size_t answer_start = 0;

  bool operator==(const SquadAnswer&) const = default;
};

struct SquadQA {
  std::string id;
  std::string question;
  std::vector<SquadAnswer> answers;
  bool is_impossible = false;

  bool operator==(const SquadQA&) const = default;
};

struct SquadParagraph {
  std::string context;
  std::vector<SquadQA> qas;

  bool operator==(const SquadParagraph&) const = default;
};

struct SquadArticle {
  std::string title;
  std::vector<SquadParagraph> paragraphs;

  bool operator==(const SquadArticle&) const = default;

  std::size_t qa_count() const;
};

inline constexpr std::string_view kDefaultVersion = "whyqa-squad-1.0";

struct SquadDataset {
  std::string version{kDefaultVersion};
  std::vector<SquadArticle> data;

  bool operator==(const SquadDataset&) const = default;

  std::size_t qa_count() const;
};

// Flattened view of one QA with the context it belongs to.
struct QAView {
  const SquadArticle* article;
  const SquadParagraph* paragraph;
  const SquadQA* qa;
};

std::vector<QAView> flatten(const SquadDataset& dataset);

// Groups by file_name in first-appearance order. Every record must pass
// validate_record; throws std::invalid_argument otherwise.
SquadDataset convert_to_squad(std::span<const WhyQARecord> records,
                              std::string version = std::string(kDefaultVersion));

struct SplitTargets {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

// 70/15/15 with round-half-up on train and validation; test takes the rest.
SplitTargets split_targets(std::size_t total_qas);

struct DatasetSplit {
  static constexpr double kTrainRatio = 0.70;
  static constexpr double kValidationRatio = 0.15;
  static constexpr double kTestRatio = 0.15;

  SquadDataset train;
  SquadDataset validation;
  SquadDataset test;
  std::uint64_t seed = 0;
};

class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Articles (file groups) are shuffled with mt19937_64(seed) and a
// Fisher-Yates pass, then filled greedily into train, validation, test.
// Inside each part articles keep their original dataset order.
DatasetSplit split_dataset(const SquadDataset& dataset, std::uint64_t seed);

class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string json_path, const std::string& detail);

  // JSONPath-style location, e.g. "$.data[0].paragraphs[2].qas[0]".
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string squad_to_json(const SquadDataset& dataset);
SquadDataset squad_from_json(std::string_view json_text);

void save_squad(const SquadDataset& dataset, const std::filesystem::path& path);
SquadDataset load_squad(const std::filesystem::path& path);

}  // namespace ehrsum::dataset
