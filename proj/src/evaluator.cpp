#include "ehrsum/evaluator.hpp"

#include <atomic>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <mutex>
#include <sstream>
#include <thread>

#include "ehrsum/prompting.hpp"
#include "ehrsum/scoring.hpp"
#include "json.hpp"

namespace ehrsum::evaluator {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <class T>
T get_field(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw std::invalid_argument("report " + where + " lacks \"" + key + "\"");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("report " + where + "." + key + " has the wrong type");
  }
}

}  // namespace

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::ExactMatch: return "exact_match";
    case Metric::F1: return "f1";
    case Metric::Rouge1: return "rouge1";
    case Metric::Rouge2: return "rouge2";
    case Metric::RougeL: return "rougeL";
    case Metric::Bleu: return "bleu";
  }
  return "";
}

std::optional<Metric> parse_metric(std::string_view key) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == key) return m;
  return std::nullopt;
}

double score_of(const metrics::MetricScores& s, Metric metric) {
  switch (metric) {
    case Metric::ExactMatch: return s.exact_match;
    case Metric::F1: return s.f1;
    case Metric::Rouge1: return s.rouge1;
    case Metric::Rouge2: return s.rouge2;
    case Metric::RougeL: return s.rougeL;
    case Metric::Bleu: return s.bleu;
  }
  return 0.0;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Good: return "Good";
    case Verdict::Acceptable: return "Acceptable";
    case Verdict::Fail: return "Fail";
  }
  return "";
}

std::optional<Verdict> parse_verdict(std::string_view name) {
  for (Verdict v : {Verdict::Good, Verdict::Acceptable, Verdict::Fail})
    if (to_string(v) == name) return v;
  return std::nullopt;
}

Verdict verdict(double score, const ThresholdGate& gate) {
  if (score > gate.good_above) return Verdict::Good;
  if (score < gate.minimum) return Verdict::Fail;
  return Verdict::Acceptable;
}

std::vector<ThresholdGate> default_gates() {
  return {
      {Metric::Rouge1, 0.50, 0.30}, {Metric::Rouge2, 0.40, 0.20}, {Metric::RougeL, 0.50, 0.30},
      {Metric::Bleu, 0.50, 0.30},   {Metric::F1, 0.80, 0.50},     {Metric::ExactMatch, 0.70, 0.40},
  };
}

std::map<Metric, Verdict> apply_gates(const metrics::MetricScores& scores, std::span<const ThresholdGate> gates) {
  std::map<Metric, Verdict> out;
  for (const auto& g : gates) {
    if (!(0.0 <= g.minimum && g.minimum <= g.good_above && g.good_above <= 1.0)) {
      throw std::invalid_argument("gate for " + std::string(to_string(g.metric)) +
                                  " must satisfy 0 <= minimum <= good_above <= 1");
    }
    if (!out.emplace(g.metric, verdict(score_of(scores, g.metric), g)).second) {
      throw std::invalid_argument("metric " + std::string(to_string(g.metric)) + " is gated more than once");
    }
  }
  return out;
}

std::string_view to_string(SplitName split) {
  switch (split) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
    case SplitName::Full: return "full";
  }
  return "";
}

std::optional<SplitName> parse_split(std::string_view name) {
  for (SplitName s : {SplitName::Train, SplitName::Validation, SplitName::Test, SplitName::Full})
    if (to_string(s) == name) return s;
  return std::nullopt;
}

MetricReport run_evaluation(const dataset::SquadDataset& dataset, const backend::Backend& backend,
                            std::span<const ThresholdGate> gates, const EvaluationOptions& options) {
  const auto qas = dataset::flatten(dataset);
  if (qas.empty()) throw EvaluationError("EmptyDataset: nothing to evaluate");
  if (options.concurrency < 1) throw std::invalid_argument("concurrency must be >= 1");
  // Fail fast on bad gates before spending any backend calls.
  apply_gates(metrics::MetricScores{}, gates);

  std::vector<std::string> preds(qas.size());
  std::vector<char> failed(qas.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= qas.size()) return;
      const auto& view = qas[i];
      try {
        backend::GenerationRequest req;
        req.input = prompting::format_model_input(view.qa->question, view.paragraph->context).text;
        req.max_new_tokens = options.max_new_tokens;
        req.request_id = view.qa->id;
        preds[i] = backend.generate(req).output;
      } catch (...) {
        failed[i] = 1;
        if (options.strict) {
          std::lock_guard lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          stop.store(true);
        }
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(options.concurrency), qas.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<scoring::CorpusPair> pairs;
  pairs.reserve(qas.size());
  for (std::size_t i = 0; i < qas.size(); ++i) {
    scoring::CorpusPair pair;
    pair.pred = preds[i];
    for (const auto& a : qas[i].qa->answers) pair.golds.push_back(a.text);
    if (pair.golds.empty()) throw EvaluationError("QA '" + qas[i].qa->id + "' has no gold answers");
    pairs.push_back(std::move(pair));
  }
  auto scored = scoring::score_corpus(pairs);

  MetricReport report;
  report.scores = scored.scores;
  report.gate_verdicts = apply_gates(report.scores, gates);
  report.per_example.reserve(qas.size());
  for (std::size_t i = 0; i < qas.size(); ++i) {
    const auto& s = scored.per_example[i];
    report.per_example.push_back(ExampleRecord{qas[i].qa->id, pairs[i].pred, pairs[i].golds.front(), s.exact_match,
                                               s.f1, s.rouge1, s.rouge2, s.rougeL});
  }
  report.run_metadata.backend_name = backend.name();
  report.run_metadata.dataset_path = options.dataset_path;
  report.run_metadata.split = options.split;
  report.run_metadata.timestamp = utc_timestamp();
  report.run_metadata.failures = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  report.run_metadata.concurrency = options.concurrency;
  return report;
}

std::string report_to_json(const MetricReport& r) {
  ordered_json j;
  ordered_json scores;
  for (Metric m : kAllMetrics) scores[std::string(to_string(m))] = score_of(r.scores, m);
  j["scores"] = std::move(scores);

  ordered_json gates = ordered_json::object();
  for (const auto& [metric, v] : r.gate_verdicts) gates[std::string(to_string(metric))] = std::string(to_string(v));
  j["gates"] = std::move(gates);

  ordered_json examples = ordered_json::array();
  for (const auto& e : r.per_example) {
    ordered_json ej;
    ej["qa_id"] = e.qa_id;
    ej["pred"] = e.pred;
    ej["gold"] = e.gold;
    ej["em"] = e.em;
    ej["f1"] = e.f1;
    ej["rouge1"] = e.rouge1;
    ej["rouge2"] = e.rouge2;
    ej["rougeL"] = e.rougeL;
    examples.push_back(std::move(ej));
  }
  j["per_example"] = std::move(examples);

  const auto& md = r.run_metadata;
  const auto& tp = RunMetadata::training_provenance;
  ordered_json meta;
  meta["backend_name"] = md.backend_name;
  meta["dataset_path"] = md.dataset_path;
  meta["split"] = std::string(to_string(md.split));
  meta["timestamp"] = md.timestamp;
  meta["failures"] = md.failures;
  meta["concurrency"] = md.concurrency;
  meta["training_provenance"] = {{"learning_rate", tp.learning_rate},
                                 {"batch_size_per_device", tp.batch_size_per_device},
                                 {"weight_decay", tp.weight_decay},
                                 {"mixed_precision", std::string(tp.mixed_precision)},
                                 {"epochs", tp.epochs}};
  j["run_metadata"] = std::move(meta);
  if (r.eval_loss) j["eval_loss"] = *r.eval_loss;
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
}

MetricReport report_from_json(std::string_view json_text) {
  const auto j = ordered_json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("report is not a JSON object");

  MetricReport r;
  const auto scores = get_field<ordered_json>(j, "scores", "$");
  r.scores.exact_match = get_field<double>(scores, "exact_match", "scores");
  r.scores.f1 = get_field<double>(scores, "f1", "scores");
  r.scores.rouge1 = get_field<double>(scores, "rouge1", "scores");
  r.scores.rouge2 = get_field<double>(scores, "rouge2", "scores");
  r.scores.rougeL = get_field<double>(scores, "rougeL", "scores");
  r.scores.bleu = get_field<double>(scores, "bleu", "scores");

  if (auto it = j.find("gates"); it != j.end()) {
    for (const auto& [key, value] : it->items()) {
      auto metric = parse_metric(key);
      auto v = value.is_string() ? parse_verdict(value.get<std::string>()) : std::nullopt;
      if (!metric || !v) throw std::invalid_argument("bad gate entry \"" + key + "\"");
      r.gate_verdicts[*metric] = *v;
    }
  }

  if (auto it = j.find("per_example"); it != j.end()) {
    for (const auto& ej : *it) {
      ExampleRecord e;
      e.qa_id = get_field<std::string>(ej, "qa_id", "per_example");
      e.pred = get_field<std::string>(ej, "pred", "per_example");
      e.gold = get_field<std::string>(ej, "gold", "per_example");
      e.em = get_field<double>(ej, "em", "per_example");
      e.f1 = get_field<double>(ej, "f1", "per_example");
      e.rouge1 = get_field<double>(ej, "rouge1", "per_example");
      e.rouge2 = get_field<double>(ej, "rouge2", "per_example");
      e.rougeL = get_field<double>(ej, "rougeL", "per_example");
      r.per_example.push_back(std::move(e));
    }
  }

  if (auto it = j.find("run_metadata"); it != j.end()) {
    auto& md = r.run_metadata;
    md.backend_name = get_field<std::string>(*it, "backend_name", "run_metadata");
    md.dataset_path = get_field<std::string>(*it, "dataset_path", "run_metadata");
    auto split = parse_split(get_field<std::string>(*it, "split", "run_metadata"));
    if (!split) throw std::invalid_argument("report run_metadata.split is not a known split");
    md.split = *split;
    md.timestamp = get_field<std::string>(*it, "timestamp", "run_metadata");
    md.failures = get_field<std::size_t>(*it, "failures", "run_metadata");
    md.concurrency = get_field<int>(*it, "concurrency", "run_metadata");
  }
  if (auto it = j.find("eval_loss"); it != j.end()) {
    if (!it->is_number()) throw std::invalid_argument("report eval_loss must be a number");
    r.eval_loss = it->get<double>();
  }
  return r;
}

std::string format_table(const MetricReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(13) << "metric" << std::right << std::setw(9) << "score" << "  verdict\n";
  for (Metric m : kAllMetrics) {
    auto v = r.gate_verdicts.find(m);
    out << std::left << std::setw(13) << to_string(m) << std::right << std::fixed << std::setprecision(2)
        << std::setw(8) << 100.0 * score_of(r.scores, m) << "%  "
        << (v == r.gate_verdicts.end() ? std::string_view("-") : to_string(v->second)) << '\n';
  }
  return out.str();
}

void write_report(const MetricReport& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string body = format == ReportFormat::Json ? report_to_json(report) : format_table(report);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dataset::IoError("IoError: cannot write " + path.string());
  out << body;
  if (!out) throw dataset::IoError("IoError: write failed for " + path.string());
}

MetricReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dataset::IoError("IoError: cannot open " + path.string());
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return report_from_json(body);
}

}  // namespace ehrsum::evaluator
