#pragma once

// Test-only reference implementations. They deliberately take different
// routes from the library code they check: LCS by exhaustive subsequence
// enumeration, BLEU with ordered-map n-gram tables and a direct product of
// precisions instead of a log-sum.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace oracle {

inline bool is_subsequence(const std::vector<std::string>& sub, const std::vector<std::string>& seq) {
  std::size_t k = 0;
  for (const auto& tok : seq)
    if (k < sub.size() && sub[k] == tok) ++k;
  return k == sub.size();
}

// Tries every subsequence of x; only usable for |x| <= ~16.
inline std::size_t lcs_by_enumeration(const std::vector<std::string>& x, const std::vector<std::string>& y) {
  std::size_t best = 0;
  const std::uint32_t limit = 1u << x.size();
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    const auto len = static_cast<std::size_t>(std::popcount(mask));
    if (len <= best) continue;
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (mask & (1u << i)) sub.push_back(x[i]);
    if (is_subsequence(sub, y)) best = len;
  }
  return best;
}

inline std::vector<std::string> whitespace_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

using Ngram = std::vector<std::string>;

inline std::map<Ngram, int> ngram_table(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, int> table;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++table[Ngram(toks.begin() + i, toks.begin() + i + n)];
  return table;
}

// Corpus BLEU: pooled clipped precisions, uniform weights, brevity penalty
// exp(1 - r/c) when c <= r, and zero precisions replaced by `epsilon`.
inline double reference_bleu(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                             int max_n = 4, double epsilon = 1e-9) {
  std::vector<double> hits(max_n, 0.0), totals(max_n, 0.0);
  double c = 0, r = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto cand = whitespace_tokens(preds[i]);
    const auto ref = whitespace_tokens(refs[i]);
    c += static_cast<double>(cand.size());
    r += static_cast<double>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      const auto ct = ngram_table(cand, static_cast<std::size_t>(n));
      const auto rt = ngram_table(ref, static_cast<std::size_t>(n));
      for (const auto& [gram, count] : ct) {
        totals[n - 1] += count;
        auto it = rt.find(gram);
        if (it != rt.end()) hits[n - 1] += std::min(count, it->second);
      }
    }
  }
  if (c == 0) return 0.0;
  double geo = 1.0;
  for (int n = 0; n < max_n; ++n) {
    double p = totals[n] > 0 ? hits[n] / totals[n] : 0.0;
    if (p == 0.0) p = epsilon;
    geo *= std::pow(p, 1.0 / max_n);
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * geo;
}

}  // namespace oracle
