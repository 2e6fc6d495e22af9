#include "ehrsum/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include "ehrsum/text.hpp"

namespace ehrsum::metrics {
namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

// Tokens never contain whitespace, so a space-joined key is unambiguous.
NgramCounts count_ngrams(std::span<const std::string> tokens, std::size_t n) {
  NgramCounts counts;
  if (n == 0 || tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (std::size_t j = 1; j < n; ++j) key.append(" ").append(tokens[i + j]);
    ++counts[key];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& pred, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : pred) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f_measure(std::size_t overlap, std::size_t pred_total, std::size_t ref_total) {
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(pred_total);
  const double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
  return 2.0 * p * r / (p + r);
}

void require_golds(std::span<const std::string> golds) {
  if (golds.empty()) throw MetricError(MetricError::Kind::NoGolds, "NoGolds: at least one gold answer is required");
}

double token_f1_single(const TokenSequence& pred, const TokenSequence& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  return f_measure(clipped_overlap(count_ngrams(pred, 1), count_ngrams(gold, 1)), pred.size(), gold.size());
}

}  // namespace

std::string normalize_text(std::string_view s) {
  std::string lowered;
  lowered.reserve(s.size());
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    lowered.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
  }
  std::string out;
  for (auto& word : text::split_whitespace(lowered)) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

TokenSequence tokenize(std::string_view s) { return text::split_whitespace(normalize_text(s)); }

int exact_match(std::string_view pred, std::span<const std::string> golds) {
  require_golds(golds);
  const std::string p = normalize_text(pred);
  return std::any_of(golds.begin(), golds.end(), [&](const std::string& g) { return normalize_text(g) == p; }) ? 1
                                                                                                             : 0;
}

double token_f1(std::string_view pred, std::span<const std::string> golds) {
  require_golds(golds);
  const TokenSequence p = tokenize(pred);
  double best = 0.0;
  for (const auto& g : golds) best = std::max(best, token_f1_single(p, tokenize(g)));
  return best;
}

double rouge_n(std::span<const std::string> pred, std::span<const std::string> ref, int n) {
  if (n != 1 && n != 2) throw MetricError(MetricError::Kind::BadOrder, "rouge_n supports n = 1 or 2");
  const auto order = static_cast<std::size_t>(n);
  const std::size_t pred_total = pred.size() >= order ? pred.size() - order + 1 : 0;
  const std::size_t ref_total = ref.size() >= order ? ref.size() - order + 1 : 0;
  if (pred_total == 0 && ref_total == 0) return std::equal(pred.begin(), pred.end(), ref.begin(), ref.end()) ? 1.0 : 0.0;
  if (pred_total == 0 || ref_total == 0) return 0.0;
  return f_measure(clipped_overlap(count_ngrams(pred, order), count_ngrams(ref, order)), pred_total, ref_total);
}

double rouge_n(std::string_view pred, std::string_view ref, int n) { return rouge_n(tokenize(pred), tokenize(ref), n); }

std::size_t lcs_length(std::span<const std::string> x, std::span<const std::string> y) {
  if (x.size() < y.size()) std::swap(x, y);
  // Two rows over the shorter sequence.
  std::vector<std::size_t> prev(y.size() + 1, 0), cur(y.size() + 1, 0);
  for (std::size_t i = 1; i <= x.size(); ++i) {
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = x[i - 1] == y[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double rouge_l(std::span<const std::string> pred, std::span<const std::string> ref) {
  if (pred.empty() && ref.empty()) return 1.0;
  if (pred.empty() || ref.empty()) return 0.0;
  return f_measure(lcs_length(pred, ref), pred.size(), ref.size());
}

double rouge_l(std::string_view pred, std::string_view ref) { return rouge_l(tokenize(pred), tokenize(ref)); }

BleuStats::BleuStats(int max_n) {
  if (max_n < 1) throw MetricError(MetricError::Kind::BadOrder, "BLEU max order must be >= 1");
  matches.assign(static_cast<std::size_t>(max_n), 0);
  totals.assign(static_cast<std::size_t>(max_n), 0);
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  if (other.matches.size() != matches.size()) {
    throw MetricError(MetricError::Kind::BadOrder, "cannot pool BLEU stats of different orders");
  }
  for (std::size_t k = 0; k < matches.size(); ++k) {
    matches[k] += other.matches[k];
    totals[k] += other.totals[k];
  }
  candidate_length += other.candidate_length;
  reference_length += other.reference_length;
  return *this;
}

double BleuStats::score() const {
  if (candidate_length == 0) return 0.0;
  const double weight = 1.0 / static_cast<double>(matches.size());
  double log_sum = 0.0;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    double p = totals[k] == 0 ? 0.0 : static_cast<double>(matches[k]) / static_cast<double>(totals[k]);
    if (p == 0.0) p = kBleuEpsilon;
    log_sum += weight * std::log(p);
  }
  const double c = static_cast<double>(candidate_length);
  const double r = static_cast<double>(reference_length);
  const double brevity = candidate_length > reference_length ? 1.0 : std::exp(1.0 - r / c);
  return brevity * std::exp(log_sum);
}

BleuStats bleu_stats(std::string_view pred, std::string_view ref, int max_n) {
  BleuStats stats(max_n);
  const auto cand = text::split_whitespace(pred);
  const auto refs = text::split_whitespace(ref);
  stats.candidate_length = cand.size();
  stats.reference_length = refs.size();
  for (std::size_t n = 1; n <= stats.matches.size(); ++n) {
    stats.totals[n - 1] = cand.size() >= n ? cand.size() - n + 1 : 0;
    stats.matches[n - 1] = clipped_overlap(count_ngrams(cand, n), count_ngrams(refs, n));
  }
  return stats;
}

double bleu(std::span<const std::string> preds, std::span<const std::string> refs, int max_n) {
  if (preds.size() != refs.size()) {
    throw MetricError(MetricError::Kind::LengthMismatch, "LengthMismatch: " + std::to_string(preds.size()) +
                                                             " predictions vs " + std::to_string(refs.size()) +
                                                             " references");
  }
  if (preds.empty()) throw MetricError(MetricError::Kind::EmptyCorpus, "BLEU needs at least one pair");
  BleuStats total(max_n);
  for (std::size_t i = 0; i < preds.size(); ++i) total += bleu_stats(preds[i], refs[i], max_n);
  return total.score();
}

}  // namespace ehrsum::metrics
