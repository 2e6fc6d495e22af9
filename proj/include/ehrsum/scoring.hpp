#pragma once

#include <span>
#include <string>
#include <vector>

#include "ehrsum/metrics.hpp"

namespace ehrsum::scoring {

struct CorpusPair {
  std::string pred;
  std::vector<std::string> golds;
};

// Scores of one example. ROUGE is computed against the first gold.
struct ExampleScores {
  double exact_match = 0;
  double f1 = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rougeL = 0;

  bool operator==(const ExampleScores&) const = default;
};

struct CorpusScores {
  metrics::MetricScores scores;
  std::vector<ExampleScores> per_example;
};

ExampleScores score_example(const CorpusPair& pair);

// Per-example scores are computed in parallel (OpenMP); means and BLEU stats
// are then reduced in dataset order, so the result is bit-identical to
// score_corpus_serial regardless of thread count.
CorpusScores score_corpus(std::span<const CorpusPair> pairs);

// Single-threaded reference kept for testing and benchmarking.
CorpusScores score_corpus_serial(std::span<const CorpusPair> pairs);

// EM/F1/ROUGE means plus corpus BLEU over (pred, first gold).
metrics::MetricScores aggregate_corpus(std::span<const CorpusPair> pairs);

}  // namespace ehrsum::scoring
