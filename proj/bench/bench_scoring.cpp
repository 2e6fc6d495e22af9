#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "ehrsum/metrics.hpp"
#include "ehrsum/scoring.hpp"

namespace {

using ehrsum::scoring::CorpusPair;

// Summary-length predictions over a small clinical vocabulary, so n-gram
// overlap is frequent enough to exercise the counting paths.
std::vector<CorpusPair> make_corpus(std::size_t n) {
  static const std::vector<std::string> vocab = {
      "patient", "was",     "treated", "with",   "levofloxacin", "because", "of",    "gram-positive",
      "cocci",   "sputum",  "culture", "lungs",  "are",          "clear",   "no",    "effusion",
      "renal",   "failure", "due",     "to",     "volume",       "depletion", "held", "plavix"};
  std::mt19937_64 rng(42);
  auto sentence = [&] {
    std::string s;
    const auto len = 8 + rng() % 32;
    for (std::size_t i = 0; i < len; ++i) s += (s.empty() ? "" : " ") + vocab[rng() % vocab.size()];
    return s;
  };
  std::vector<CorpusPair> out(n);
  for (auto& p : out) {
    p.pred = sentence();
    p.golds = {sentence()};
  }
  return out;
}

void BM_ScoreCorpusSerial(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ehrsum::scoring::score_corpus_serial(corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ScoreCorpusParallel(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ehrsum::scoring::score_corpus(corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RougeL(benchmark::State& state) {
  const auto corpus = make_corpus(1);
  for (auto _ : state) benchmark::DoNotOptimize(ehrsum::metrics::rouge_l(corpus[0].pred, corpus[0].golds[0]));
}

void BM_Bleu(benchmark::State& state) {
  const auto corpus = make_corpus(static_cast<std::size_t>(state.range(0)));
  std::vector<std::string> preds, refs;
  for (const auto& p : corpus) {
    preds.push_back(p.pred);
    refs.push_back(p.golds[0]);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ehrsum::metrics::bleu(preds, refs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_ScoreCorpusSerial)->Arg(277)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreCorpusParallel)->Arg(277)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RougeL);
BENCHMARK(BM_Bleu)->Arg(277)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
