#pragma once

// Corpus text metrics for caption/description tasks: corpus-level BLEU,
// LCS-based ROUGE-L, and CIDEr-D with log10(1 + c) rescaling.

#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drivelang/types.hpp"

namespace drivelang {

struct TokenizerOptions {
  bool lowercase{true};
  bool strip_punctuation{true};
};

inline std::vector<std::string> tokenize(std::string_view text,
                                         const TokenizerOptions& opts = {}) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
      continue;
    }
    if (opts.strip_punctuation && c < 0x80 && std::ispunct(c)) continue;
    cur += opts.lowercase && c < 0x80 ? static_cast<char>(std::tolower(c))
                                      : raw;
  }
  flush();
  return tokens;
}

// One candidate against one or more references, already tokenized.
struct TokenizedPair {
  std::vector<std::string> candidate;
  std::vector<std::vector<std::string>> references;

  void validate() const {
    if (references.empty()) {
      throw ValidationError("tokenized pair requires at least one reference");
    }
  }
};

inline TokenizedPair make_pair_from_text(std::string_view candidate,
                                         const std::vector<std::string>& references,
                                         const TokenizerOptions& opts = {}) {
  TokenizedPair p;
  p.candidate = tokenize(candidate, opts);
  for (const std::string& r : references) p.references.push_back(tokenize(r, opts));
  p.validate();
  return p;
}

namespace detail {

// n-grams keyed by their tokens joined with an unlikely separator.
inline std::map<std::string, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

inline std::size_t lcs_length(const std::vector<std::string>& a,
                              const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1
                                    : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

struct BleuOptions {
  std::size_t max_n{4};
  // Unsmoothed by default: any zero modified precision yields BLEU 0. When
  // > 0, zero numerators are replaced by this epsilon.
  double smoothing_epsilon{0.0};
};

// Corpus-level BLEU: geometric mean of modified n-gram precisions times the
// brevity penalty exp(min(0, 1 - ref_len/cand_len)). Reference length is the
// per-pair closest reference length (ties toward the shorter one).
inline double bleu(const std::vector<TokenizedPair>& pairs,
                   const BleuOptions& opts = {}) {
  if (pairs.empty()) throw ValidationError("bleu: pairs must be nonempty");
  if (opts.max_n == 0) throw ValidationError("bleu: max_n must be >= 1");
  std::vector<double> numer(opts.max_n, 0.0);
  std::vector<double> denom(opts.max_n, 0.0);
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (const TokenizedPair& p : pairs) {
    p.validate();
    cand_len += static_cast<double>(p.candidate.size());
    std::size_t closest = p.references[0].size();
    for (const auto& r : p.references) {
      const auto diff = [&](std::size_t len) {
        const auto c = p.candidate.size();
        return len > c ? len - c : c - len;
      };
      if (diff(r.size()) < diff(closest) ||
          (diff(r.size()) == diff(closest) && r.size() < closest)) {
        closest = r.size();
      }
    }
    ref_len += static_cast<double>(closest);
    for (std::size_t n = 1; n <= opts.max_n; ++n) {
      const auto cand_counts = detail::ngram_counts(p.candidate, n);
      std::map<std::string, std::size_t> max_ref;
      for (const auto& r : p.references) {
        for (const auto& [gram, count] : detail::ngram_counts(r, n)) {
          auto& slot = max_ref[gram];
          slot = std::max(slot, count);
        }
      }
      for (const auto& [gram, count] : cand_counts) {
        denom[n - 1] += static_cast<double>(count);
        auto it = max_ref.find(gram);
        if (it != max_ref.end()) {
          numer[n - 1] += static_cast<double>(std::min(count, it->second));
        }
      }
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < opts.max_n; ++n) {
    double num = numer[n];
    if (num == 0.0 && opts.smoothing_epsilon > 0.0) num = opts.smoothing_epsilon;
    if (num == 0.0 || denom[n] == 0.0) return 0.0;
    log_sum += std::log(num / denom[n]);
  }
  const double brevity = std::exp(std::min(0.0, 1.0 - ref_len / cand_len));
  return brevity * std::exp(log_sum / static_cast<double>(opts.max_n));
}

// Mean over pairs of the LCS F-measure, maximized over references.
inline double rouge_l(const std::vector<TokenizedPair>& pairs, double beta = 1.2) {
  if (pairs.empty()) throw ValidationError("rouge-l: pairs must be nonempty");
  const double beta2 = beta * beta;
  double sum = 0.0;
  for (const TokenizedPair& p : pairs) {
    p.validate();
    double best = 0.0;
    for (const auto& r : p.references) {
      if (p.candidate.empty() || r.empty()) continue;
      const double lcs = static_cast<double>(detail::lcs_length(p.candidate, r));
      if (lcs == 0.0) continue;
      const double prec = lcs / static_cast<double>(p.candidate.size());
      const double rec = lcs / static_cast<double>(r.size());
      const double f = (1.0 + beta2) * prec * rec / (rec + beta2 * prec);
      best = std::max(best, f);
    }
    sum += best;
  }
  return sum / static_cast<double>(pairs.size());
}

struct CiderOptions {
  std::size_t max_n{4};
  double sigma{6.0};
};

// CIDEr-D: clipped TF-IDF n-gram cosine per n, Gaussian length penalty,
// averaged over n and references, scaled by 10. Document frequency and the
// log-N normalizer come from the reference corpus, so a single-pair corpus
// scores 0 by construction.
inline double cider(const std::vector<TokenizedPair>& pairs,
                    const CiderOptions& opts = {}) {
  if (pairs.empty()) throw ValidationError("cider: pairs must be nonempty");
  const std::size_t max_n = opts.max_n;

  // Pass 1: document frequency over reference sets (count once per pair).
  std::vector<std::map<std::string, double>> df(max_n);
  for (const TokenizedPair& p : pairs) {
    p.validate();
    for (std::size_t n = 1; n <= max_n; ++n) {
      std::map<std::string, std::size_t> seen;
      for (const auto& r : p.references) {
        for (const auto& [gram, count] : detail::ngram_counts(r, n)) {
          seen[gram] = 1;
        }
      }
      for (const auto& [gram, one] : seen) df[n - 1][gram] += 1.0;
    }
  }
  const double log_corpus = std::log(static_cast<double>(pairs.size()));

  struct Vec {
    std::map<std::string, double> weights;
    double norm{0.0};
  };
  auto to_vec = [&](const std::vector<std::string>& tokens, std::size_t n) {
    Vec v;
    for (const auto& [gram, count] : detail::ngram_counts(tokens, n)) {
      auto it = df[n - 1].find(gram);
      const double doc_freq = it == df[n - 1].end() ? 0.0 : it->second;
      const double idf = log_corpus - std::log(std::max(1.0, doc_freq));
      const double w = static_cast<double>(count) * idf;
      v.weights[gram] = w;
      v.norm += w * w;
    }
    v.norm = std::sqrt(v.norm);
    return v;
  };

  // Pass 2: clipped cosine similarity against each reference.
  double total = 0.0;
  for (const TokenizedPair& p : pairs) {
    double pair_score = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
      const Vec cand = to_vec(p.candidate, n);
      double val_n = 0.0;
      for (const auto& r : p.references) {
        const Vec ref = to_vec(r, n);
        double dot = 0.0;
        for (const auto& [gram, w] : cand.weights) {
          auto it = ref.weights.find(gram);
          if (it != ref.weights.end()) {
            dot += std::min(w, it->second) * it->second;
          }
        }
        double sim = 0.0;
        if (cand.norm > 0.0 && ref.norm > 0.0) {
          sim = dot / (cand.norm * ref.norm);
        }
        const double delta = static_cast<double>(p.candidate.size()) -
                             static_cast<double>(r.size());
        sim *= std::exp(-delta * delta / (2.0 * opts.sigma * opts.sigma));
        val_n += sim;
      }
      pair_score += val_n;
    }
    pair_score /= static_cast<double>(max_n);
    pair_score /= static_cast<double>(p.references.size());
    total += 10.0 * pair_score;
  }
  return total / static_cast<double>(pairs.size());
}

// The report-facing normalization of raw CIDEr scores.
inline double rescale_cider(double c) {
  if (c < 0.0) throw ValidationError("rescale_cider: input must be >= 0");
  return std::log10(c + 1.0);
}

}  // namespace drivelang
