#include "ehrsum/scoring.hpp"

#include <cstddef>
#include <cstdint>

namespace ehrsum::scoring {
namespace {

void require_valid(std::span<const CorpusPair> pairs) {
  if (pairs.empty()) throw metrics::MetricError(metrics::MetricError::Kind::EmptyCorpus, "EmptyCorpus: no examples");
  for (const auto& p : pairs) {
    if (p.golds.empty()) {
      throw metrics::MetricError(metrics::MetricError::Kind::NoGolds, "NoGolds: example without gold answers");
    }
  }
}

CorpusScores reduce(std::vector<ExampleScores> per_example, std::span<const metrics::BleuStats> stats) {
  CorpusScores out;
  metrics::BleuStats pooled;
  for (std::size_t i = 0; i < per_example.size(); ++i) {
    const auto& e = per_example[i];
    out.scores.exact_match += e.exact_match;
    out.scores.f1 += e.f1;
    out.scores.rouge1 += e.rouge1;
    out.scores.rouge2 += e.rouge2;
    out.scores.rougeL += e.rougeL;
    pooled += stats[i];
  }
  const auto n = static_cast<double>(per_example.size());
  out.scores.exact_match /= n;
  out.scores.f1 /= n;
  out.scores.rouge1 /= n;
  out.scores.rouge2 /= n;
  out.scores.rougeL /= n;
  out.scores.bleu = pooled.score();
  out.per_example = std::move(per_example);
  return out;
}

}  // namespace

ExampleScores score_example(const CorpusPair& pair) {
  const auto pred = metrics::tokenize(pair.pred);
  const auto ref = metrics::tokenize(pair.golds.front());
  ExampleScores s;
  s.exact_match = metrics::exact_match(pair.pred, pair.golds);
  s.f1 = metrics::token_f1(pair.pred, pair.golds);
  s.rouge1 = metrics::rouge_n(pred, ref, 1);
  s.rouge2 = metrics::rouge_n(pred, ref, 2);
  s.rougeL = metrics::rouge_l(pred, ref);
  return s;
}

CorpusScores score_corpus(std::span<const CorpusPair> pairs) {
  require_valid(pairs);
  const auto n = static_cast<std::int64_t>(pairs.size());
  std::vector<ExampleScores> per_example(pairs.size());
  std::vector<metrics::BleuStats> stats(pairs.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    per_example[static_cast<std::size_t>(i)] = score_example(pair);
    stats[static_cast<std::size_t>(i)] = metrics::bleu_stats(pair.pred, pair.golds.front());
  }

  return reduce(std::move(per_example), stats);
}

CorpusScores score_corpus_serial(std::span<const CorpusPair> pairs) {
  require_valid(pairs);
  std::vector<ExampleScores> per_example;
  std::vector<metrics::BleuStats> stats;
  per_example.reserve(pairs.size());
  stats.reserve(pairs.size());
  for (const auto& pair : pairs) {
    per_example.push_back(score_example(pair));
    stats.push_back(metrics::bleu_stats(pair.pred, pair.golds.front()));
  }
  return reduce(std::move(per_example), stats);
}

metrics::MetricScores aggregate_corpus(std::span<const CorpusPair> pairs) { return score_corpus(pairs).scores; }

}  // namespace ehrsum::scoring
