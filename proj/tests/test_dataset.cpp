#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ehrsum/dataset.hpp"
#include "fixture_data.hpp"

using namespace ehrsum::dataset;

namespace {

const std::string kHeader = "FileName,SentenceText,WhyQACue,DerivedQuestion,Answer,AnswerBegin,QuestionAnchor,AnswerReasonType\n";

std::vector<WhyQARecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_whyqa_table(in, TableFormat::Csv);
}

template <class Fn>
TableError expect_table_error(Fn&& fn) {
  try {
    fn();
  } catch (const TableError& e) {
    return e;
  }
  FAIL("expected TableError");
  throw std::logic_error("unreachable");
}

// Naive first-occurrence search, counted in code points.
std::size_t first_occurrence(const std::string& hay, const std::string& needle) {
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (hay.compare(i, needle.size(), needle) == 0) {
      std::size_t cp = 0;
      for (std::size_t b = 0; b < i; ++b)
        if ((static_cast<unsigned char>(hay[b]) & 0xC0) != 0x80) ++cp;
      return cp;
    }
  }
  return std::string::npos;
}

SquadDataset singleton_groups(std::size_t n) {
  std::vector<WhyQARecord> records;
  std::mt19937_64 rng(42);
  for (std::size_t i = 0; i < n; ++i) records.push_back(fixtures::synthetic_record(rng, "doc" + std::to_string(i)));
  return convert_to_squad(records);
}

}  // namespace

TEST_CASE("parse the bundled fixture table") {
  const auto records = read_whyqa_file(fixtures::whyqa_csv());
  REQUIRE(records.size() == 6);
  CHECK(records[0] == fixtures::levo_record());
  CHECK(records[2].cue == Cue::DueTo);
  CHECK(records[4].question_anchor == QuestionAnchor::Avoidance);
  CHECK(records[4].answer_reason_type == AnswerReasonType::AdverseEffect);
  for (const auto& r : records) CHECK(validate_record(r).ok());
}

TEST_CASE("header-only table yields no records") {
  CHECK(parse_csv(kHeader).empty());
  CHECK(parse_csv(kHeader + "\n").empty());
}

TEST_CASE("table errors name the row and column") {
  SUBCASE("negative offset") {
    auto e = expect_table_error([] { parse_csv(kHeader + "dc1,because x,because,Why?,x,-1,Medication,AdverseEffect\n"); });
    CHECK(e.kind() == TableError::Kind::BadOffset);
    CHECK(e.row() == 2);
    CHECK(e.column() == "AnswerBegin");
  }
  SUBCASE("non-integer offset") {
    auto e = expect_table_error([] {
      parse_csv(kHeader + "dc1,because x,because,Why?,x,12,Medication,AdverseEffect\n"
                          "dc1,because y,because,Why?,y,1.5,Medication,AdverseEffect\n");
    });
    CHECK(e.kind() == TableError::Kind::BadOffset);
    CHECK(e.row() == 3);
  }
  SUBCASE("missing column") {
    auto e = expect_table_error([] { parse_csv("FileName,SentenceText,WhyQACue,DerivedQuestion,Answer\n"); });
    CHECK(e.kind() == TableError::Kind::MissingColumn);
    CHECK(e.column() == "AnswerBegin");
  }
  SUBCASE("blank cell") {
    auto e = expect_table_error([] { parse_csv(kHeader + "dc1,because x,because,  ,x,8,Medication,AdverseEffect\n"); });
    CHECK(e.kind() == TableError::Kind::EmptyField);
    CHECK(e.row() == 2);
    CHECK(e.column() == "DerivedQuestion");
  }
  SUBCASE("short row") {
    auto e = expect_table_error([] { parse_csv(kHeader + "dc1,because x,because\n"); });
    CHECK(e.kind() == TableError::Kind::EmptyField);
  }
  SUBCASE("unknown enum") {
    auto e = expect_table_error([] { parse_csv(kHeader + "dc1,because x,since,Why?,x,8,Medication,AdverseEffect\n"); });
    CHECK(e.kind() == TableError::Kind::BadValue);
    CHECK(e.column() == "WhyQACue");
  }
  SUBCASE("unterminated quote") {
    auto e = expect_table_error([] { parse_csv(kHeader + "dc1,\"because x,because,Why?,x,8,Medication,AdverseEffect\n"); });
    CHECK(e.kind() == TableError::Kind::Malformed);
  }
}

TEST_CASE("enum cells are case-insensitive and TSV works") {
  std::istringstream in(
      "AnswerReasonType\tQuestionAnchor\tFileName\tSentenceText\tWhyQACue\tDerivedQuestion\tAnswer\tAnswerBegin\textra\n"
      "adverse effect\tDISPOSITION\tdc9\tHeld due to rash.\tDUE TO\tWhy held?\trash\t12\tignored\n");
  auto records = parse_whyqa_table(in, TableFormat::Tsv);
  REQUIRE(records.size() == 1);
  CHECK(records[0].cue == Cue::DueTo);
  CHECK(records[0].question_anchor == QuestionAnchor::Disposition);
  CHECK(records[0].answer_reason_type == AnswerReasonType::AdverseEffect);
  CHECK(validate_record(records[0]).ok());
}

TEST_CASE("quoted cells keep delimiters, quotes and newlines") {
  auto records = parse_csv(kHeader +
                           "dc1,\"Said \"\"stop\"\", because of pain,\nthen left.\",because,Why?,pain,24,Avoidance,"
                           "ClinicalIndication\r\n");
  REQUIRE(records.size() == 1);
  CHECK(records[0].sentence_text == "Said \"stop\", because of pain,\nthen left.");
  CHECK(validate_record(records[0]).ok());
}

TEST_CASE("write then parse preserves records") {
  std::mt19937_64 rng(7);
  std::vector<WhyQARecord> records;
  for (int i = 0; i < 50; ++i) records.push_back(fixtures::synthetic_record(rng, "f" + std::to_string(i % 7), i % 2));
  records[3].sentence_text = "Has, \"commas\" because\nnewline";
  records[3].answer = "newline";
  records[3].answer_begin = 22;
  for (auto format : {TableFormat::Csv, TableFormat::Tsv}) {
    std::stringstream buf;
    write_whyqa_table(buf, records, format);
    CHECK(parse_whyqa_table(buf, format) == records);
  }
}

TEST_CASE("validate_record reports each broken invariant") {
  auto r = fixtures::levo_record();
  CHECK(validate_record(r).ok());

  SUBCASE("offset off by one") {
    r.answer_begin += 1;
    auto v = validate_record(r);
    REQUIRE(v.violations.size() == 1);
    CHECK(v.has(Violation::Kind::OffsetMismatch));
    CHECK(v.violations[0].message.starts_with("offset mismatch"));
  }
  SUBCASE("offset past the end") {
    r.answer_begin = r.sentence_text.size() + 10;
    CHECK(validate_record(r).has(Violation::Kind::OffsetMismatch));
  }
  SUBCASE("cue absent") {
    r.cue = Cue::DueTo;
    auto v = validate_record(r);
    REQUIRE(v.violations.size() == 1);
    CHECK(v.violations[0].message.starts_with("cue not found"));
  }
  SUBCASE("empty question and answer") {
    r.derived_question = " ";
    r.answer = "";
    auto v = validate_record(r);
    CHECK(v.has(Violation::Kind::EmptyQuestion));
    CHECK(v.has(Violation::Kind::EmptyAnswer));
  }
}

TEST_CASE("repair_offset moves to the first occurrence") {
  WhyQARecord r;
  r.file_name = "dc5";
  r.sentence_text = "Neurology was consulted due to the concern for seizures in the setting of dusky episodes.";
  r.cue = Cue::DueTo;
  r.derived_question = "Summarize why Neurology was consulted?";
  r.answer = "concern for seizures";
  r.answer_begin = 0;
  REQUIRE(validate_record(r).has(Violation::Kind::OffsetMismatch));

  auto fixed = repair_offset(r);
  REQUIRE(fixed);
  CHECK(fixed->answer_begin == first_occurrence(r.sentence_text, r.answer));
  CHECK(fixed->answer_begin == 35);
  CHECK(validate_record(*fixed).ok());

  SUBCASE("two occurrences") {
    r.sentence_text = "Held due to rash; the rash recurred.";
    r.answer = "rash";
    auto twice = repair_offset(r);
    REQUIRE(twice);
    CHECK(twice->answer_begin == first_occurrence(r.sentence_text, "rash"));
    CHECK(twice->answer_begin == 12);
  }
  SUBCASE("absent") {
    r.answer = "hypoxia";
    CHECK_FALSE(repair_offset(r).has_value());
  }
  SUBCASE("multi-byte prefix counts code points") {
    r.sentence_text = "\xCE\xB2-blocker held due to bradycardia.";  // β-blocker
    r.answer = "bradycardia";
    auto u = repair_offset(r);
    REQUIRE(u);
    CHECK(u->answer_begin == 22);
    CHECK(validate_record(*u).ok());
  }
}

TEST_CASE("prepare_records repairs what it can and drops the rest") {
  auto good = fixtures::levo_record();
  auto shifted = good;
  shifted.answer_begin = 3;
  auto missing = good;
  missing.answer = "not in the sentence";
  auto no_cue = good;
  no_cue.cue = Cue::DueTo;

  const std::vector<WhyQARecord> input = {good, shifted, missing, no_cue};
  auto prepared = prepare_records(input);
  CHECK(prepared.kept.size() == 2);
  CHECK(prepared.repaired == 1);
  REQUIRE(prepared.dropped.size() == 2);
  CHECK(prepared.dropped[0].index == 2);
  CHECK(prepared.dropped[1].index == 3);
  CHECK(prepared.dropped[1].reason.find("cue not found") != std::string::npos);
}

TEST_CASE("convert_to_squad groups by file name") {
  SUBCASE("empty input") {
    auto d = convert_to_squad({});
    CHECK(d.data.empty());
    CHECK(d.version == "whyqa-squad-1.0");
  }
  SUBCASE("fixture table") {
    const auto records = read_whyqa_file(fixtures::whyqa_csv());
    const auto d = convert_to_squad(records);
    CHECK(d.qa_count() == records.size());
    REQUIRE(d.data.size() == 5);
    CHECK(d.data[0].title == "dc1");
    REQUIRE(d.data[0].paragraphs.size() == 2);
    CHECK(d.data[0].paragraphs[0].qas[0].id == "dc1-0");
    CHECK(d.data[0].paragraphs[1].qas[0].id == "dc1-1");
    CHECK(d.data[1].title == "dc2");

    const auto& qa = d.data[0].paragraphs[0].qas[0];
    CHECK(d.data[0].paragraphs[0].context == fixtures::kLevoContext);
    CHECK(qa.question == fixtures::kLevoQuestion);
    CHECK_FALSE(qa.is_impossible);
    REQUIRE(qa.answers.size() == 1);
    // Re-validate the converter's own output.
    WhyQARecord back = fixtures::levo_record();
    back.answer = qa.answers[0].text;
    back.answer_begin = qa.answers[0].answer_start;
    CHECK(validate_record(back).ok());
  }
  SUBCASE("invalid record is rejected") {
    auto bad = fixtures::levo_record();
    bad.answer_begin = 0;
    const std::vector<WhyQARecord> input = {bad};
    CHECK_THROWS_AS(convert_to_squad(input), std::invalid_argument);
  }
}

TEST_CASE("conversion preserves counts on random input") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WhyQARecord> records;
    std::set<std::string> names;
    const int n = 1 + static_cast<int>(rng() % 60);
    for (int i = 0; i < n; ++i) {
      auto name = "f" + std::to_string(rng() % 9);
      names.insert(name);
      records.push_back(fixtures::synthetic_record(rng, name, trial % 2));
    }
    const auto d = convert_to_squad(records);
    CHECK(d.qa_count() == records.size());
    CHECK(d.data.size() == names.size());
    std::set<std::string> ids;
    for (const auto& v : flatten(d)) {
      ids.insert(v.qa->id);
      WhyQARecord check;
      check.sentence_text = v.paragraph->context;
      check.answer = v.qa->answers[0].text;
      check.answer_begin = v.qa->answers[0].answer_start;
      check.derived_question = v.qa->question;
      check.cue = check.sentence_text.find("because") != std::string::npos ? Cue::Because : Cue::DueTo;
      CHECK(validate_record(check).ok());
    }
    CHECK(ids.size() == records.size());
  }
}

TEST_CASE("split targets follow the rounding rule") {
  auto t = split_targets(277);
  CHECK(t.train == 194);
  CHECK(t.validation == 42);
  CHECK(t.test == 41);
  t = split_targets(10);
  CHECK(t.train == 7);
  CHECK(t.validation == 2);
  CHECK(t.test == 1);
  for (std::size_t n = 0; n < 500; ++n) {
    auto s = split_targets(n);
    CHECK(s.train + s.validation + s.test == n);
  }
}

TEST_CASE("split_dataset over singleton groups hits the targets exactly") {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto split = split_dataset(singleton_groups(277), seed);
    CHECK(split.train.qa_count() == 194);
    CHECK(split.validation.qa_count() == 42);
    CHECK(split.test.qa_count() == 41);
    auto small = split_dataset(singleton_groups(10), seed);
    CHECK(small.train.qa_count() == 7);
    CHECK(small.validation.qa_count() == 2);
    CHECK(small.test.qa_count() == 1);
  }
}

TEST_CASE("split_dataset is deterministic and seed-dependent") {
  const auto d = singleton_groups(50);
  const auto a = split_dataset(d, 5);
  const auto b = split_dataset(d, 5);
  CHECK(squad_to_json(a.train) == squad_to_json(b.train));
  CHECK(squad_to_json(a.validation) == squad_to_json(b.validation));
  CHECK(squad_to_json(a.test) == squad_to_json(b.test));
  const auto c = split_dataset(d, 6);
  CHECK(squad_to_json(a.train) != squad_to_json(c.train));
}

TEST_CASE("split_dataset partitions groups") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WhyQARecord> records;
    const int n = 3 + static_cast<int>(rng() % 200);
    for (int i = 0; i < n; ++i) records.push_back(fixtures::synthetic_record(rng, "g" + std::to_string(rng() % (3 + n / 2))));
    const auto d = convert_to_squad(records);
    if (d.data.size() < 3) continue;
    std::size_t largest = 0;
    for (const auto& a : d.data) largest = std::max(largest, a.qa_count());

    const auto split = split_dataset(d, static_cast<std::uint64_t>(trial));
    std::multiset<std::string> titles;
    for (const auto* part : {&split.train, &split.validation, &split.test})
      for (const auto& a : part->data) titles.insert(a.title);
    CHECK(titles.size() == d.data.size());
    CHECK(std::set<std::string>(titles.begin(), titles.end()).size() == d.data.size());
    CHECK(split.train.qa_count() + split.validation.qa_count() + split.test.qa_count() == d.qa_count());

    const auto target = split_targets(d.qa_count());
    CHECK(split.train.qa_count() >= target.train);
    CHECK(split.train.qa_count() <= target.train + largest - 1);
    CHECK(split.validation.qa_count() <= target.validation + largest - 1);
    // Test absorbs the overshoot of both earlier parts.
    CHECK(split.test.qa_count() + 2 * (largest - 1) >= target.test);
  }
}

TEST_CASE("split_dataset needs three groups") {
  std::mt19937_64 rng(1);
  const std::vector<WhyQARecord> records = {fixtures::synthetic_record(rng, "a"), fixtures::synthetic_record(rng, "b"),
                                            fixtures::synthetic_record(rng, "a")};
  CHECK_THROWS_AS(split_dataset(convert_to_squad(records), 0), SplitError);
}

TEST_CASE("SQuAD JSON layout") {
  const std::vector<WhyQARecord> records = {fixtures::levo_record()};
  const auto json = squad_to_json(convert_to_squad(records));
  CHECK(json.starts_with("{\n  \"version\": \"whyqa-squad-1.0\",\n  \"data\": [\n    {\n      \"title\": \"dc1\",\n"));
  const auto ctx = json.find("\"context\"");
  const auto qas = json.find("\"qas\"");
  const auto id = json.find("\"id\"");
  const auto question = json.find("\"question\"");
  const auto answers = json.find("\"answers\"");
  const auto text = json.find("\"text\"");
  const auto start = json.find("\"answer_start\": 57");
  const auto imp = json.find("\"is_impossible\": false");
  CHECK(ctx < qas);
  CHECK(qas < id);
  CHECK(id < question);
  CHECK(question < answers);
  CHECK(answers < text);
  CHECK(text < start);
  CHECK(start < imp);
  CHECK(imp != std::string::npos);
}

TEST_CASE("save then load is the identity") {
  const auto dir = std::filesystem::temp_directory_path() / "ehrsum_test_dataset";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<WhyQARecord> records;
    for (int i = 0; i < 40; ++i) records.push_back(fixtures::synthetic_record(rng, "f" + std::to_string(rng() % 6), true));
    const auto d = convert_to_squad(records, "v" + std::to_string(trial));
    const auto path = dir / "roundtrip.json";
    save_squad(d, path);
    CHECK(load_squad(path) == d);
  }
}

TEST_CASE("load_squad schema errors carry a JSON path") {
  auto expect = [](const std::string& json) -> SchemaError {
    try {
      squad_from_json(json);
    } catch (const SchemaError& e) {
      return e;
    }
    FAIL("expected SchemaError");
    throw std::logic_error("unreachable");
  };
  CHECK(expect(R"({"version": "x"})").path() == "$");
  CHECK(expect("[1, 2]").path() == "$");
  CHECK(expect("{not json").path() == "$");

  auto e = expect(R"({"version":"x","data":[{"title":"t","paragraphs":[{"context":"abc","qas":[
      {"id":"t-0","question":"q","answers":[{"text":"bc","answer_start":5}],"is_impossible":false}]}]}]})");
  CHECK(e.path() == "$.data[0].paragraphs[0].qas[0].answers[0].answer_start");
  CHECK(std::string(e.what()).find("t-0") != std::string::npos);

  e = expect(R"({"version":"x","data":[{"title":"t","paragraphs":[{"context":"abc","qas":[
      {"id":"t-0","question":"q","answers":[{"text":"ab","answer_start":1}]}]}]}]})");
  CHECK(e.path() == "$.data[0].paragraphs[0].qas[0].answers[0]");

  e = expect(R"({"version":"x","data":[{"title":"t","paragraphs":[{"context":"abc","qas":[
      {"id":"d","question":"q","answers":[]},{"id":"d","question":"q","answers":[]}]}]}]})");
  CHECK(e.path() == "$.data[0].paragraphs[0].qas[1].id");

  e = expect(R"({"version":"x","data":[{"title":7,"paragraphs":[]}]})");
  CHECK(e.path() == "$.data[0].title");

  e = expect(R"({"version":"x","data":[{"title":"t","paragraphs":[{"context":"abc","qas":[
      {"id":"n","question":"q","answers":[{"text":"a","answer_start":-1}]}]}]}]})");
  CHECK(e.path() == "$.data[0].paragraphs[0].qas[0].answers[0].answer_start");
}

TEST_CASE("missing files raise IoError") {
  CHECK_THROWS_AS(load_squad("/nonexistent/squad.json"), IoError);
  CHECK_THROWS_AS(read_whyqa_file("/nonexistent/whyqa.csv"), IoError);
}
