#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ehrsum::metrics {

// Post-normalization tokens: none empty, none containing whitespace.
using TokenSequence = std::vector<std::string>;

class MetricError : public std::invalid_argument {
 public:
  enum class Kind { NoGolds, LengthMismatch, EmptyCorpus, BadOrder };

  MetricError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct MetricScores {
  double exact_match = 0;
  double f1 = 0;
  double rouge1 = 0;
  double rouge2 = 0;
  double rougeL = 0;
  double bleu = 0;

  bool operator==(const MetricScores&) const = default;
};

// SQuAD-style: lowercase, drop ASCII punctuation, drop the articles
// a/an/the, collapse whitespace. Non-ASCII bytes are left alone.
std::string normalize_text(std::string_view s);

TokenSequence tokenize(std::string_view s);

// 1 if the normalized prediction equals any normalized gold.
int exact_match(std::string_view pred, std::span<const std::string> golds);

// Multiset token overlap F1, maximised over golds.
double token_f1(std::string_view pred, std::span<const std::string> golds);

// F1 of clipped n-gram overlap, n in {1, 2}.
double rouge_n(std::string_view pred, std::string_view ref, int n);
double rouge_n(std::span<const std::string> pred, std::span<const std::string> ref, int n);

std::size_t lcs_length(std::span<const std::string> x, std::span<const std::string> y);

double rouge_l(std::string_view pred, std::string_view ref);
double rouge_l(std::span<const std::string> pred, std::span<const std::string> ref);

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr int kBleuMaxOrder = 4;

// Sufficient statistics for corpus BLEU. Summing the stats of individual
// pairs and scoring once is the corpus pooling.
struct BleuStats {
  std::vector<std::size_t> matches;  // clipped matches per order, index 0 = unigrams
  std::vector<std::size_t> totals;   // candidate n-grams per order
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;

  explicit BleuStats(int max_n = kBleuMaxOrder);
  BleuStats& operator+=(const BleuStats& other);
  double score() const;
};

// BLEU tokenises on raw whitespace with no normalization.
BleuStats bleu_stats(std::string_view pred, std::string_view ref, int max_n = kBleuMaxOrder);

// Corpus BLEU with uniform weights, brevity penalty and epsilon smoothing of
// zero precisions.
double bleu(std::span<const std::string> preds, std::span<const std::string> refs, int max_n = kBleuMaxOrder);

}  // namespace ehrsum::metrics
