#include "ehrsum/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "ehrsum/text.hpp"
#include "json.hpp"

namespace ehrsum::dataset {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kColumnCount = std::size(kColumns);

// Lowercased with spaces, underscores and hyphens removed.
std::string enum_key(std::string_view cell) {
  std::string key;
  for (char c : text::trim(cell)) {
    if (c == ' ' || c == '_' || c == '-') continue;
    key.push_back(c);
  }
  return text::to_lower_ascii(key);
}

// Splits a delimited stream into rows of cells. Fields may be wrapped in
// double quotes, with "" as an escaped quote; quoted fields may span lines.
class DelimitedReader {
 public:
  DelimitedReader(std::istream& in, char delimiter) : in_(in), delimiter_(delimiter) {}

  // Returns false at end of input. `line` is the physical line the row starts on.
  bool next(std::vector<std::string>& row, std::size_t& line) {
    row.clear();
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    line = ++line_;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (;;) {
      int ch = in_.get();
      if (ch == std::char_traits<char>::eof()) {
        if (quoted) throw TableError(TableError::Kind::Malformed, line, "", "unterminated quoted field");
        row.push_back(std::move(field));
        return true;
      }
      char c = static_cast<char>(ch);
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"' && !field_started) {
        quoted = true;
        field_started = true;
      } else if (c == delimiter_) {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
      } else if (c == '\r' && in_.peek() == '\n') {
        continue;
      } else if (c == '\n') {
        row.push_back(std::move(field));
        return true;
      } else {
        field.push_back(c);
        field_started = true;
      }
    }
  }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 0;
};

char delimiter_for(TableFormat format) { return format == TableFormat::Tsv ? '\t' : ','; }

Cue parse_cue(std::string_view cell, std::size_t row) {
  const std::string key = enum_key(cell);
  if (key == "because") return Cue::Because;
  if (key == "dueto") return Cue::DueTo;
  throw TableError(TableError::Kind::BadValue, row, "WhyQACue", "unknown cue '" + std::string(cell) + "'");
}

QuestionAnchor parse_anchor(std::string_view cell, std::size_t row) {
  const std::string key = enum_key(cell);
  if (key == "medication") return QuestionAnchor::Medication;
  if (key == "avoidance") return QuestionAnchor::Avoidance;
  if (key == "procedure") return QuestionAnchor::Procedure;
  if (key == "disposition") return QuestionAnchor::Disposition;
  throw TableError(TableError::Kind::BadValue, row, "QuestionAnchor",
                   "unknown question anchor '" + std::string(cell) + "'");
}

AnswerReasonType parse_reason(std::string_view cell, std::size_t row) {
  const std::string key = enum_key(cell);
  if (key == "adverseeffect") return AnswerReasonType::AdverseEffect;
  if (key == "clinicalindication") return AnswerReasonType::ClinicalIndication;
  throw TableError(TableError::Kind::BadValue, row, "AnswerReasonType",
                   "unknown answer reason type '" + std::string(cell) + "'");
}

std::size_t parse_offset(std::string_view cell, std::size_t row) {
  const std::string_view digits = text::trim(cell);
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (digits.empty() || digits.front() == '-' || digits.front() == '+' || ec != std::errc() ||
      ptr != digits.data() + digits.size()) {
    throw TableError(TableError::Kind::BadOffset, row, "AnswerBegin",
                     "answer_begin '" + std::string(cell) + "' is not a non-negative integer");
  }
  return value;
}

std::string quote_cell(std::string_view cell, char delimiter) {
  const bool needs_quotes = cell.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
  if (!needs_quotes) return std::string(cell);
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string table_error_message(TableError::Kind kind, std::size_t row, const std::string& column,
                                const std::string& detail) {
  static constexpr std::array<std::string_view, 5> names = {"MissingColumn", "BadOffset", "EmptyField",
                                                            "BadValue", "Malformed"};
  std::string msg = std::string(names[static_cast<std::size_t>(kind)]) + " at row " + std::to_string(row);
  if (!column.empty()) msg += ", column " + column;
  return msg + ": " + detail;
}

}  // namespace

std::string_view to_string(Cue cue) { return cue == Cue::Because ? "Because" : "DueTo"; }

std::string_view to_string(QuestionAnchor anchor) {
  switch (anchor) {
    case QuestionAnchor::Medication: return "Medication";
    case QuestionAnchor::Avoidance: return "Avoidance";
    case QuestionAnchor::Procedure: return "Procedure";
    case QuestionAnchor::Disposition: return "Disposition";
  }
  return "";
}

std::string_view to_string(AnswerReasonType reason) {
  return reason == AnswerReasonType::AdverseEffect ? "AdverseEffect" : "ClinicalIndication";
}

std::string_view cue_phrase(Cue cue) { return cue == Cue::Because ? "because" : "due to"; }

TableError::TableError(Kind kind, std::size_t row, std::string column, const std::string& detail)
    : std::runtime_error(table_error_message(kind, row, column, detail)),
      kind_(kind),
      row_(row),
      column_(std::move(column)) {}

std::vector<WhyQARecord> parse_whyqa_table(std::istream& source, TableFormat format) {
  DelimitedReader reader(source, delimiter_for(format));
  std::vector<std::string> cells;
  std::size_t line = 0;
  if (!reader.next(cells, line)) {
    throw TableError(TableError::Kind::MissingColumn, 1, std::string(kColumns[0]), "table has no header row");
  }
  // Tolerate a UTF-8 byte order mark on the first header cell.
  if (!cells.empty() && cells[0].starts_with("\xEF\xBB\xBF")) cells[0].erase(0, 3);

  std::array<std::size_t, kColumnCount> index{};
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    auto it = std::find_if(cells.begin(), cells.end(),
                           [&](const std::string& h) { return text::trim(h) == kColumns[c]; });
    if (it == cells.end()) {
      throw TableError(TableError::Kind::MissingColumn, 1, std::string(kColumns[c]), "header lacks required column");
    }
    index[c] = static_cast<std::size_t>(it - cells.begin());
  }

  std::vector<WhyQARecord> records;
  std::size_t row = 1;
  while (reader.next(cells, line)) {
    ++row;
    if (cells.size() == 1 && text::is_blank(cells[0])) continue;
    auto cell = [&](std::size_t c) -> const std::string& {
      static const std::string empty;
      const std::size_t i = index[c];
      const std::string& value = i < cells.size() ? cells[i] : empty;
      if (text::is_blank(value)) {
        throw TableError(TableError::Kind::EmptyField, row, std::string(kColumns[c]), "required cell is blank");
      }
      return value;
    };
    WhyQARecord r;
    r.file_name = std::string(text::trim(cell(0)));
    r.sentence_text = cell(1);
    r.cue = parse_cue(cell(2), row);
    r.derived_question = cell(3);
    r.answer = cell(4);
    r.answer_begin = parse_offset(cell(5), row);
    r.question_anchor = parse_anchor(cell(6), row);
    r.answer_reason_type = parse_reason(cell(7), row);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<WhyQARecord> read_whyqa_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const auto ext = text::to_lower_ascii(path.extension().string());
  return parse_whyqa_table(in, ext == ".tsv" ? TableFormat::Tsv : TableFormat::Csv);
}

void write_whyqa_table(std::ostream& out, std::span<const WhyQARecord> records, TableFormat format) {
  const char d = delimiter_for(format);
  for (std::size_t c = 0; c < kColumnCount; ++c) {
    if (c) out << d;
    out << kColumns[c];
  }
  out << '\n';
  for (const auto& r : records) {
    out << quote_cell(r.file_name, d) << d << quote_cell(r.sentence_text, d) << d << cue_phrase(r.cue) << d
        << quote_cell(r.derived_question, d) << d << quote_cell(r.answer, d) << d << r.answer_begin << d
        << to_string(r.question_anchor) << d << to_string(r.answer_reason_type) << '\n';
  }
}

bool ValidationResult::has(Violation::Kind kind) const {
  return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; });
}

ValidationResult validate_record(const WhyQARecord& record) {
  ValidationResult result;
  if (text::is_blank(record.derived_question)) {
    result.violations.push_back({Violation::Kind::EmptyQuestion, "empty question"});
  }
  if (text::is_blank(record.answer)) {
    result.violations.push_back({Violation::Kind::EmptyAnswer, "empty answer"});
  }
  const auto begin = text::codepoint_to_byte(record.sentence_text, record.answer_begin);
  const bool matches = begin && *begin + record.answer.size() <= record.sentence_text.size() &&
                       std::string_view(record.sentence_text).substr(*begin, record.answer.size()) == record.answer;
  if (!matches) {
    result.violations.push_back({Violation::Kind::OffsetMismatch,
                                 "offset mismatch: answer not found at index " + std::to_string(record.answer_begin)});
  }
  if (!text::ifind(record.sentence_text, cue_phrase(record.cue))) {
    result.violations.push_back(
        {Violation::Kind::CueNotFound, "cue not found: '" + std::string(cue_phrase(record.cue)) + "'"});
  }
  return result;
}

std::optional<WhyQARecord> repair_offset(const WhyQARecord& record) {
  if (record.answer.empty()) return std::nullopt;
  const auto pos = record.sentence_text.find(record.answer);
  if (pos == std::string::npos) return std::nullopt;
  WhyQARecord fixed = record;
  fixed.answer_begin = text::byte_to_codepoint(record.sentence_text, pos);
  return fixed;
}

PreparedRecords prepare_records(std::span<const WhyQARecord> records) {
  PreparedRecords out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const WhyQARecord& r = records[i];
    auto check = validate_record(r);
    if (check.ok()) {
      out.kept.push_back(r);
      continue;
    }
    if (check.violations.size() == 1 && check.has(Violation::Kind::OffsetMismatch)) {
      if (auto fixed = repair_offset(r)) {
        out.kept.push_back(std::move(*fixed));
        ++out.repaired;
        continue;
      }
      out.dropped.push_back({i, r, "answer does not occur in sentence"});
      continue;
    }
    std::string reason;
    for (const auto& v : check.violations) {
      if (!reason.empty()) reason += "; ";
      reason += v.message;
    }
    out.dropped.push_back({i, r, reason});
  }
  return out;
}

std::size_t SquadArticle::qa_count() const {
  std::size_t n = 0;
  for (const auto& p : paragraphs) n += p.qas.size();
  return n;
}

std::size_t SquadDataset::qa_count() const {
  std::size_t n = 0;
  for (const auto& a : data) n += a.qa_count();
  return n;
}

std::vector<QAView> flatten(const SquadDataset& dataset) {
  std::vector<QAView> out;
  out.reserve(dataset.qa_count());
  for (const auto& a : dataset.data)
    for (const auto& p : a.paragraphs)
      for (const auto& q : p.qas) out.push_back({&a, &p, &q});
  return out;
}

SquadDataset convert_to_squad(std::span<const WhyQARecord> records, std::string version) {
  SquadDataset out;
  out.version = std::move(version);
  std::unordered_map<std::string, std::size_t> article_of;
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const WhyQARecord& r = records[i];
    if (auto check = validate_record(r); !check.ok()) {
      throw std::invalid_argument("record " + std::to_string(i) + " (" + r.file_name +
                                  ") fails validation: " + check.violations.front().message);
    }
    auto [it, inserted] = article_of.try_emplace(r.file_name, out.data.size());
    if (inserted) out.data.push_back(SquadArticle{r.file_name, {}});
    SquadArticle& article = out.data[it->second];

    SquadQA qa;
    qa.id = r.file_name + "-" + std::to_string(article.paragraphs.size());
    qa.question = r.derived_question;
    qa.answers.push_back({r.answer, r.answer_begin});
    qa.is_impossible = false;
    if (!ids.insert(qa.id).second) throw std::logic_error("DuplicateId: " + qa.id);

    article.paragraphs.push_back(SquadParagraph{r.sentence_text, {std::move(qa)}});
  }
  return out;
}

SplitTargets split_targets(std::size_t total_qas) {
  SplitTargets t;
  t.train = (70 * total_qas + 50) / 100;
  t.validation = (15 * total_qas + 50) / 100;
  t.validation = std::min(t.validation, total_qas - std::min(t.train, total_qas));
  t.test = total_qas - t.train - t.validation;
  return t;
}

DatasetSplit split_dataset(const SquadDataset& dataset, std::uint64_t seed) {
  const std::size_t groups = dataset.data.size();
  if (groups < 3) {
    throw SplitError("TooFewGroups: need at least 3 file groups to split, got " + std::to_string(groups));
  }

  std::vector<std::size_t> order(groups);
  for (std::size_t i = 0; i < groups; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = groups - 1; i > 0; --i) {
    const std::uint64_t range = i + 1;
    const std::uint64_t threshold = (0 - range) % range;
    std::uint64_t r;
    do {
      r = rng();
    } while (r < threshold);
    std::swap(order[i], order[static_cast<std::size_t>(r % range)]);
  }

  const SplitTargets target = split_targets(dataset.qa_count());
  enum Part : unsigned char { kTrain, kValidation, kTest };
  std::vector<Part> part_of(groups, kTest);
  std::size_t train = 0, validation = 0;
  for (std::size_t g : order) {
    const std::size_t n = dataset.data[g].qa_count();
    if (train < target.train) {
      part_of[g] = kTrain;
      train += n;
    } else if (validation < target.validation) {
      part_of[g] = kValidation;
      validation += n;
    }
  }

  DatasetSplit split;
  split.seed = seed;
  split.train.version = split.validation.version = split.test.version = dataset.version;
  for (std::size_t g = 0; g < groups; ++g) {
    SquadDataset& dest = part_of[g] == kTrain ? split.train : part_of[g] == kValidation ? split.validation : split.test;
    dest.data.push_back(dataset.data[g]);
  }
  return split;
}

SchemaError::SchemaError(std::string json_path, const std::string& detail)
    : std::runtime_error("SchemaError at " + json_path + ": " + detail), path_(std::move(json_path)) {}

std::string squad_to_json(const SquadDataset& dataset) {
  ordered_json root;
  root["version"] = dataset.version;
  root["data"] = ordered_json::array();
  for (const auto& a : dataset.data) {
    ordered_json article;
    article["title"] = a.title;
    article["paragraphs"] = ordered_json::array();
    for (const auto& p : a.paragraphs) {
      ordered_json para;
      para["context"] = p.context;
      para["qas"] = ordered_json::array();
      for (const auto& q : p.qas) {
        ordered_json qa;
        qa["id"] = q.id;
        qa["question"] = q.question;
        qa["answers"] = ordered_json::array();
        for (const auto& ans : q.answers) {
          ordered_json aj;
          aj["text"] = ans.text;
          aj["answer_start"] = ans.answer_start;
          qa["answers"].push_back(std::move(aj));
        }
        qa["is_impossible"] = q.is_impossible;
        para["qas"].push_back(std::move(qa));
      }
      article["paragraphs"].push_back(std::move(para));
    }
    root["data"].push_back(std::move(article));
  }
  try {
    return root.dump(2) + "\n";
  } catch (const nlohmann::json::type_error& e) {
    throw std::invalid_argument(std::string("dataset contains invalid UTF-8: ") + e.what());
  }
}

namespace {

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path, std::string("missing key \"") + key + "\"");
  return *it;
}

std::string require_string(const ordered_json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "." + key, "expected string");
  return v.get<std::string>();
}

const ordered_json& require_array(const ordered_json& obj, const char* key, const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_array()) throw SchemaError(path + "." + key, "expected array");
  return v;
}

void require_object(const ordered_json& v, const std::string& path) {
  if (!v.is_object()) throw SchemaError(path, "expected object");
}

}  // namespace

SquadDataset squad_from_json(std::string_view json_text) {
  ordered_json root;
  try {
    root = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("malformed JSON: ") + e.what());
  }
  require_object(root, "$");

  SquadDataset out;
  out.version = require_string(root, "version", "$");
  const auto& data = require_array(root, "data", "$");
  std::unordered_set<std::string> ids;
  for (std::size_t ai = 0; ai < data.size(); ++ai) {
    const std::string apath = "$.data[" + std::to_string(ai) + "]";
    const auto& aj = data[ai];
    require_object(aj, apath);
    SquadArticle article;
    article.title = require_string(aj, "title", apath);
    const auto& paragraphs = require_array(aj, "paragraphs", apath);
    for (std::size_t pi = 0; pi < paragraphs.size(); ++pi) {
      const std::string ppath = apath + ".paragraphs[" + std::to_string(pi) + "]";
      const auto& pj = paragraphs[pi];
      require_object(pj, ppath);
      SquadParagraph para;
      para.context = require_string(pj, "context", ppath);
      const std::size_t context_len = text::codepoint_length(para.context);
      const auto& qas = require_array(pj, "qas", ppath);
      for (std::size_t qi = 0; qi < qas.size(); ++qi) {
        const std::string qpath = ppath + ".qas[" + std::to_string(qi) + "]";
        const auto& qj = qas[qi];
        require_object(qj, qpath);
        SquadQA qa;
        qa.id = require_string(qj, "id", qpath);
        qa.question = require_string(qj, "question", qpath);
        if (!ids.insert(qa.id).second) throw SchemaError(qpath + ".id", "duplicate QA id '" + qa.id + "'");
        if (auto it = qj.find("is_impossible"); it != qj.end()) {
          if (!it->is_boolean()) throw SchemaError(qpath + ".is_impossible", "expected boolean");
          qa.is_impossible = it->get<bool>();
        }
        const auto& answers = require_array(qj, "answers", qpath);
        for (std::size_t xi = 0; xi < answers.size(); ++xi) {
          const std::string xpath = qpath + ".answers[" + std::to_string(xi) + "]";
          const auto& xj = answers[xi];
          require_object(xj, xpath);
          SquadAnswer ans;
          ans.text = require_string(xj, "text", xpath);
          const auto& start = require(xj, "answer_start", xpath);
          if (!start.is_number_integer() || (start.is_number_integer() && !start.is_number_unsigned() &&
                                             start.get<std::int64_t>() < 0)) {
            throw SchemaError(xpath + ".answer_start",
                              "answer_start must be a non-negative integer in QA '" + qa.id + "'");
          }
          ans.answer_start = start.get<std::size_t>();
          const std::size_t answer_len = text::codepoint_length(ans.text);
          if (ans.answer_start > context_len || answer_len > context_len - ans.answer_start) {
            throw SchemaError(xpath + ".answer_start", "answer_start " + std::to_string(ans.answer_start) +
                                                           " beyond context length " + std::to_string(context_len) +
                                                           " in QA '" + qa.id + "'");
          }
          const std::size_t b = *text::codepoint_to_byte(para.context, ans.answer_start);
          if (std::string_view(para.context).substr(b, ans.text.size()) != ans.text) {
            throw SchemaError(xpath, "answer text does not match context at answer_start in QA '" + qa.id + "'");
          }
          qa.answers.push_back(std::move(ans));
        }
        para.qas.push_back(std::move(qa));
      }
      article.paragraphs.push_back(std::move(para));
    }
    out.data.push_back(std::move(article));
  }
  return out;
}

void save_squad(const SquadDataset& dataset, const std::filesystem::path& path) {
  const std::string body = squad_to_json(dataset);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("write failed for " + path.string());
}

SquadDataset load_squad(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return squad_from_json(body);
}

}  // namespace ehrsum::dataset
