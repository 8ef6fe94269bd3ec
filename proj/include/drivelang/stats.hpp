#pragma once

// Dataset statistics: caption word frequency, task distribution, and
// per-camera view distribution.

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "drivelang/metrics_lang.hpp"
#include "drivelang/types.hpp"

namespace drivelang {

// Corpus-wide token counts, sorted by count descending then token ascending.
inline std::vector<std::pair<std::string, std::size_t>> word_frequency(
    const std::vector<std::string>& captions, std::size_t top_n,
    const TokenizerOptions& opts = {}) {
  if (top_n == 0) throw ValidationError("word_frequency: top_n must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const std::string& caption : captions) {
    for (const std::string& token : tokenize(caption, opts)) {
      ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

inline std::map<TaskKind, double> task_distribution(
    const std::vector<TaskSample>& samples) {
  if (samples.empty()) {
    throw ValidationError("task_distribution: samples must be nonempty");
  }
  std::map<TaskKind, std::size_t> counts;
  for (const TaskSample& s : samples) ++counts[s.task];
  std::map<TaskKind, double> out;
  for (const auto& [task, count] : counts) {
    out[task] = static_cast<double>(count) / static_cast<double>(samples.size());
  }
  return out;
}

struct ViewDistribution {
  std::map<View, double> fractions;  // over non-surround samples only
  std::size_t surround_count{0};
  std::size_t view_count{0};
};

// Surround-view samples (planning, dense captions) are excluded from the
// per-view fractions and reported separately.
inline ViewDistribution view_distribution(const std::vector<TaskSample>& samples) {
  if (samples.empty()) {
    throw ValidationError("view_distribution: samples must be nonempty");
  }
  ViewDistribution out;
  std::map<View, std::size_t> counts;
  for (const TaskSample& s : samples) {
    if (s.view == kSurroundView) {
      ++out.surround_count;
    } else {
      ++counts[parse_view(s.view)];
      ++out.view_count;
    }
  }
  for (const auto& [view, count] : counts) {
    out.fractions[view] =
        static_cast<double>(count) / static_cast<double>(out.view_count);
  }
  return out;
}

}  // namespace drivelang
