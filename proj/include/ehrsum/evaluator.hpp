#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ehrsum/backend.hpp"
#include "ehrsum/dataset.hpp"
#include "ehrsum/metrics.hpp"

namespace ehrsum::evaluator {

enum class Metric { ExactMatch, F1, Rouge1, Rouge2, RougeL, Bleu };

inline constexpr std::array<Metric, 6> kAllMetrics = {Metric::ExactMatch, Metric::F1,     Metric::Rouge1,
                                                      Metric::Rouge2,     Metric::RougeL, Metric::Bleu};

// JSON key of the metric: exact_match, f1, rouge1, rouge2, rougeL, bleu.
std::string_view to_string(Metric metric);
std::optional<Metric> parse_metric(std::string_view key);

double score_of(const metrics::MetricScores& scores, Metric metric);

struct ThresholdGate {
  Metric metric;
  double good_above;
  double minimum;
};

enum class Verdict { Good, Acceptable, Fail };

std::string_view to_string(Verdict verdict);
std::optional<Verdict> parse_verdict(std::string_view name);

// Good strictly above good_above, Fail strictly below minimum, Acceptable
// on the closed interval in between.
Verdict verdict(double score, const ThresholdGate& gate);

// Good/minimum bands used to judge a fine-tuned summarizer.
std::vector<ThresholdGate> default_gates();

// Throws std::invalid_argument when a gate is malformed or a metric is
// gated twice.
std::map<Metric, Verdict> apply_gates(const metrics::MetricScores& scores, std::span<const ThresholdGate> gates);

// Hyperparameters the reference checkpoint was reportedly trained with.
// Carried into reports as documentation only.
struct TrainingProvenance {
  double learning_rate = 1e-5;
  int batch_size_per_device = 1;
  double weight_decay = 0.01;
  std::string_view mixed_precision = "fp16";
  int epochs = 3;
};

enum class SplitName { Train, Validation, Test, Full };

std::string_view to_string(SplitName split);
std::optional<SplitName> parse_split(std::string_view name);

struct RunMetadata {
  static constexpr TrainingProvenance training_provenance{};

  std::string backend_name;
  std::string dataset_path;
  SplitName split = SplitName::Full;
  std::string timestamp;  // ISO 8601, UTC
  std::size_t failures = 0;
  int concurrency = 1;

  bool operator==(const RunMetadata&) const = default;
};

struct ExampleRecord {
  std::string qa_id;
  std::string pred;
  std::string gold;
  double em = 0;
  double f1 = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rougeL = 0;

  bool operator==(const ExampleRecord&) const = default;
};

struct MetricReport {
  metrics::MetricScores scores;
  std::vector<ExampleRecord> per_example;
  std::map<Metric, Verdict> gate_verdicts;
  RunMetadata run_metadata;
  std::optional<double> eval_loss;

  bool operator==(const MetricReport&) const = default;
};

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kDefaultConcurrency = 4;

struct EvaluationOptions {
  int concurrency = kDefaultConcurrency;
  // Abort on the first failed generation instead of scoring it as "".
  bool strict = false;
  int max_new_tokens = backend::kDefaultMaxNewTokens;
  std::string dataset_path;
  SplitName split = SplitName::Full;
};

// Prompts every QA, generates with up to `concurrency` requests in flight,
// and scores the answers. per_example follows dataset order.
MetricReport run_evaluation(const dataset::SquadDataset& dataset, const backend::Backend& backend,
                            std::span<const ThresholdGate> gates, const EvaluationOptions& options = {});

enum class ReportFormat { Json, Table };

std::string report_to_json(const MetricReport& report);
MetricReport report_from_json(std::string_view json_text);
std::string format_table(const MetricReport& report);

// Throws dataset::IoError when the file cannot be written.
void write_report(const MetricReport& report, const std::filesystem::path& path, ReportFormat format);
MetricReport load_report(const std::filesystem::path& path);

}  // namespace ehrsum::evaluator
