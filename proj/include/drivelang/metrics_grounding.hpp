#pragma once

// Detection-style metrics for grounding and planning tasks: Pr@k over
// center distance, center-distance mAP, IoU-matched F1, 2D box metrics,
// and planning-command accuracy.
//
// The *_grouped variants take a group index per box (one group per task
// sample); matches never cross groups but the precision-recall statistics
// are pooled over the whole input. Conventions for empty inputs: a call
// with no ground truth scores 1 when there are no predictions either
// (correct abstention) and 0 otherwise.

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "drivelang/assignment.hpp"
#include "drivelang/geometry.hpp"
#include "drivelang/types.hpp"

namespace drivelang {

// --- Pr@k -------------------------------------------------------------------

struct PrAtKResult {
  std::vector<double> ks;
  std::vector<double> per_k;  // aligned with ks, non-decreasing
  double mean{0.0};
};

inline void validate_ks(const std::vector<double>& ks) {
  if (ks.empty()) throw ValidationError("pr@k thresholds must be nonempty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (!(ks[i] > 0.0)) throw ValidationError("pr@k thresholds must be positive");
    if (i > 0 && !(ks[i] > ks[i - 1])) {
      throw ValidationError("pr@k thresholds must be strictly ascending");
    }
  }
}

// Pools grounding precision over many samples: per sample, predictions and
// ground truths are matched one-to-one by Hungarian on xyz center distance;
// a ground truth counts as hit at k when its matched prediction lies closer
// than k.
class PrAtKAccumulator {
 public:
  explicit PrAtKAccumulator(std::vector<double> ks) : ks_(std::move(ks)) {
    validate_ks(ks_);
    hits_.assign(ks_.size(), 0);
  }

  void add(const std::vector<Box3D>& preds, const std::vector<Box3D>& gts) {
    total_preds_ += preds.size();
    total_gt_ += gts.size();
    if (preds.empty() || gts.empty()) return;
    CostMatrix costs(preds.size(), gts.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      for (std::size_t j = 0; j < gts.size(); ++j) {
        costs.at(i, j) = center_distance(preds[i], gts[j], DistanceMode::Xyz);
      }
    }
    const Assignment asg = hungarian(costs);
    for (const auto& [pi, gi] : asg.pairs) {
      const double d = center_distance(preds[pi], gts[gi], DistanceMode::Xyz);
      for (std::size_t k = 0; k < ks_.size(); ++k) {
        if (d < ks_[k]) ++hits_[k];
      }
    }
  }

  PrAtKResult result() const {
    PrAtKResult r;
    r.ks = ks_;
    r.per_k.resize(ks_.size());
    for (std::size_t k = 0; k < ks_.size(); ++k) {
      if (total_gt_ == 0) {
        r.per_k[k] = total_preds_ == 0 ? 1.0 : 0.0;
      } else {
        r.per_k[k] = static_cast<double>(hits_[k]) / static_cast<double>(total_gt_);
      }
    }
    r.mean = std::accumulate(r.per_k.begin(), r.per_k.end(), 0.0) /
             static_cast<double>(r.per_k.size());
    return r;
  }

 private:
  std::vector<double> ks_;
  std::vector<std::size_t> hits_;
  std::size_t total_gt_{0};
  std::size_t total_preds_{0};
};

inline PrAtKResult pr_at_k(const std::vector<Box3D>& preds,
                           const std::vector<Box3D>& gts,
                           const std::vector<double>& ks = {0.5, 1.0, 2.0, 4.0}) {
  PrAtKAccumulator acc(ks);
  acc.add(preds, gts);
  return acc.result();
}

// --- interpolated average precision ------------------------------------------

namespace detail {

// 101-point interpolated area under the precision-recall curve given the
// ranked list of TP/FP flags (descending confidence) and the GT count.
inline double interpolated_ap(const std::vector<char>& ranked_tp, std::size_t n_gt) {
  if (n_gt == 0) return ranked_tp.empty() ? 1.0 : 0.0;
  if (ranked_tp.empty()) return 0.0;
  std::vector<double> recall(ranked_tp.size());
  std::vector<double> precision(ranked_tp.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
    if (ranked_tp[i]) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope from the right.
  std::vector<double> max_from(precision.size());
  double running = 0.0;
  for (std::size_t i = precision.size(); i-- > 0;) {
    running = std::max(running, precision[i]);
    max_from[i] = running;
  }
  double ap_sum = 0.0;
  std::size_t pt = 0;
  for (int level = 0; level <= 100; ++level) {
    const double r = static_cast<double>(level) / 100.0;
    while (pt < recall.size() && recall[pt] < r) ++pt;
    if (pt < recall.size()) ap_sum += max_from[pt];
  }
  return ap_sum / 101.0;
}

struct RankedPred {
  double confidence;
  std::size_t group;
  std::size_t index;  // into the group-local box list
};

}  // namespace detail

struct GroupedBox3D {
  std::size_t group{0};
  Box3D box;
};

struct GroupedScoredBox3D {
  std::size_t group{0};
  Box3D box;
  double confidence{1.0};
};

// nuScenes-protocol AP: predictions ranked by descending confidence (ties
// keep input order) greedily claim the nearest unmatched ground truth of
// their group by BEV center distance; a claim closer than dist_thresh is a
// true positive.
inline double average_precision_3d_grouped(const std::vector<GroupedScoredBox3D>& preds,
                                           const std::vector<GroupedBox3D>& gts,
                                           double dist_thresh) {
  if (!(dist_thresh > 0.0)) {
    throw ValidationError("ap: dist_thresh must be positive");
  }
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  std::vector<char> gt_used(gts.size(), 0);
  std::vector<char> ranked_tp;
  ranked_tp.reserve(preds.size());
  for (std::size_t oi : order) {
    const GroupedScoredBox3D& p = preds[oi];
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].group != p.group) continue;
      const double d = center_distance(p.box, gts[g].box, DistanceMode::Bev);
      if (d < best) {
        best = d;
        best_g = g;
      }
    }
    if (best_g < gts.size() && best < dist_thresh) {
      gt_used[best_g] = 1;
      ranked_tp.push_back(1);
    } else {
      ranked_tp.push_back(0);
    }
  }
  return detail::interpolated_ap(ranked_tp, gts.size());
}

inline double average_precision_3d(const std::vector<std::pair<Box3D, double>>& preds,
                                   const std::vector<Box3D>& gts,
                                   double dist_thresh = 0.5) {
  std::vector<GroupedScoredBox3D> p;
  p.reserve(preds.size());
  for (const auto& [box, conf] : preds) p.push_back({0, box, conf});
  std::vector<GroupedBox3D> g;
  g.reserve(gts.size());
  for (const Box3D& box : gts) g.push_back({0, box});
  return average_precision_3d_grouped(p, g, dist_thresh);
}

// Mean AP over the categories present in the ground truth.
inline double map_3d(const std::map<std::string, std::vector<GroupedScoredBox3D>>& preds,
                     const std::map<std::string, std::vector<GroupedBox3D>>& gts,
                     double dist_thresh = 0.5) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& [category, gt_boxes] : gts) {
    if (gt_boxes.empty()) continue;
    auto it = preds.find(category);
    static const std::vector<GroupedScoredBox3D> kNone;
    sum += average_precision_3d_grouped(it == preds.end() ? kNone : it->second,
                                        gt_boxes, dist_thresh);
    ++n;
  }
  if (n == 0) {
    std::size_t total_preds = 0;
    for (const auto& [category, p] : preds) total_preds += p.size();
    return total_preds == 0 ? 1.0 : 0.0;
  }
  return sum / static_cast<double>(n);
}

// --- IoU-matched F1 -----------------------------------------------------------

struct MatchCounts {
  std::size_t tp{0};
  std::size_t n_pred{0};
  std::size_t n_gt{0};

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    n_pred += o.n_pred;
    n_gt += o.n_gt;
    return *this;
  }
};

struct PrecisionRecallF1 {
  double precision{0.0};
  double recall{0.0};
  double f1{0.0};
};

inline PrecisionRecallF1 prf_from_counts(const MatchCounts& c) {
  if (c.n_pred == 0 && c.n_gt == 0) return {1.0, 1.0, 1.0};
  PrecisionRecallF1 r;
  r.precision = c.n_pred == 0 ? 0.0
                              : static_cast<double>(c.tp) / static_cast<double>(c.n_pred);
  r.recall = c.n_gt == 0 ? 0.0
                         : static_cast<double>(c.tp) / static_cast<double>(c.n_gt);
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

// Hungarian matching on 1 - iou_3d; matched pairs with IoU strictly above
// iou_thresh count as true positives.
inline MatchCounts f1_counts_3d(const std::vector<Box3D>& preds,
                                const std::vector<Box3D>& gts, double iou_thresh) {
  MatchCounts counts;
  counts.n_pred = preds.size();
  counts.n_gt = gts.size();
  if (preds.empty() || gts.empty()) return counts;
  CostMatrix costs(preds.size(), gts.size());
  std::vector<std::vector<double>> iou(preds.size(), std::vector<double>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      iou[i][j] = iou_3d(preds[i], gts[j]);
      costs.at(i, j) = 1.0 - iou[i][j];
    }
  }
  for (const auto& [pi, gi] : hungarian(costs).pairs) {
    if (iou[pi][gi] > iou_thresh) ++counts.tp;
  }
  return counts;
}

inline PrecisionRecallF1 f1_3d(const std::vector<Box3D>& preds,
                               const std::vector<Box3D>& gts, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw ValidationError("f1: iou_thresh must lie in (0, 1)");
  }
  return prf_from_counts(f1_counts_3d(preds, gts, iou_thresh));
}

// --- 2D visual grounding -------------------------------------------------------

struct GroupedBox2D {
  std::size_t group{0};
  Box2D box;
};

struct GroupedScoredBox2D {
  std::size_t group{0};
  Box2D box;
  double confidence{1.0};
};

// COCO-style greedy matching at one IoU threshold: ranked predictions claim
// the unmatched same-group ground truth of highest IoU when that IoU
// reaches the threshold.
inline double average_precision_2d_grouped(const std::vector<GroupedScoredBox2D>& preds,
                                           const std::vector<GroupedBox2D>& gts,
                                           double iou_thresh) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  std::vector<char> gt_used(gts.size(), 0);
  std::vector<char> ranked_tp;
  ranked_tp.reserve(preds.size());
  for (std::size_t oi : order) {
    const GroupedScoredBox2D& p = preds[oi];
    double best = 0.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g] || gts[g].group != p.group) continue;
      const double v = iou_2d(p.box, gts[g].box);
      if (v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gts.size() && best >= iou_thresh) {
      gt_used[best_g] = 1;
      ranked_tp.push_back(1);
    } else {
      ranked_tp.push_back(0);
    }
  }
  return detail::interpolated_ap(ranked_tp, gts.size());
}

inline const std::vector<double>& coco_iou_thresholds() {
  static const std::vector<double> t = {0.50, 0.55, 0.60, 0.65, 0.70,
                                        0.75, 0.80, 0.85, 0.90, 0.95};
  return t;
}

// Hungarian-matched IoU sum plus TP count at `f1_iou_thresh`; unmatched
// ground truths contribute IoU 0 to the mean.
struct Vg2dMatchStats {
  double matched_iou_sum{0.0};
  MatchCounts counts;

  Vg2dMatchStats& operator+=(const Vg2dMatchStats& o) {
    matched_iou_sum += o.matched_iou_sum;
    counts += o.counts;
    return *this;
  }
};

inline Vg2dMatchStats vg2d_match_stats(const std::vector<Box2D>& preds,
                                       const std::vector<Box2D>& gts,
                                       double f1_iou_thresh) {
  Vg2dMatchStats stats;
  stats.counts.n_pred = preds.size();
  stats.counts.n_gt = gts.size();
  if (preds.empty() || gts.empty()) return stats;
  CostMatrix costs(preds.size(), gts.size());
  std::vector<std::vector<double>> iou(preds.size(), std::vector<double>(gts.size()));
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      iou[i][j] = iou_2d(preds[i], gts[j]);
      costs.at(i, j) = 1.0 - iou[i][j];
    }
  }
  for (const auto& [pi, gi] : hungarian(costs).pairs) {
    stats.matched_iou_sum += iou[pi][gi];
    if (iou[pi][gi] > f1_iou_thresh) ++stats.counts.tp;
  }
  return stats;
}

struct Vg2dMetrics {
  double map{0.0};
  double f1{0.0};
  double miou{0.0};
};

inline Vg2dMetrics vg2d_metrics_grouped(const std::vector<GroupedScoredBox2D>& preds,
                                        const std::vector<GroupedBox2D>& gts,
                                        double f1_iou_thresh = 0.5) {
  Vg2dMetrics out;
  if (preds.empty() && gts.empty()) return {1.0, 1.0, 1.0};

  std::size_t n_groups = 0;
  for (const auto& p : preds) n_groups = std::max(n_groups, p.group + 1);
  for (const auto& g : gts) n_groups = std::max(n_groups, g.group + 1);
  std::vector<std::vector<Box2D>> pred_by_group(n_groups), gt_by_group(n_groups);
  for (const auto& p : preds) pred_by_group[p.group].push_back(p.box);
  for (const auto& g : gts) gt_by_group[g.group].push_back(g.box);

  Vg2dMatchStats stats;
  for (std::size_t g = 0; g < n_groups; ++g) {
    stats += vg2d_match_stats(pred_by_group[g], gt_by_group[g], f1_iou_thresh);
  }
  out.miou = stats.counts.n_gt == 0
                 ? (stats.counts.n_pred == 0 ? 1.0 : 0.0)
                 : stats.matched_iou_sum / static_cast<double>(stats.counts.n_gt);
  out.f1 = prf_from_counts(stats.counts).f1;

  double ap_sum = 0.0;
  for (double t : coco_iou_thresholds()) {
    ap_sum += average_precision_2d_grouped(preds, gts, t);
  }
  out.map = ap_sum / static_cast<double>(coco_iou_thresholds().size());
  return out;
}

inline Vg2dMetrics vg2d_metrics(const std::vector<std::pair<Box2D, double>>& preds,
                                const std::vector<Box2D>& gts,
                                double f1_iou_thresh = 0.5) {
  std::vector<GroupedScoredBox2D> p;
  p.reserve(preds.size());
  for (const auto& [box, conf] : preds) p.push_back({0, box, conf});
  std::vector<GroupedBox2D> g;
  g.reserve(gts.size());
  for (const Box2D& box : gts) g.push_back({0, box});
  return vg2d_metrics_grouped(p, g, f1_iou_thresh);
}

// --- planning accuracy ----------------------------------------------------------

// Lowercases, maps '_' to space, strips remaining ASCII punctuation, and
// collapses whitespace, so "Turn Left." and "turn_left" compare equal.
inline std::string canonical_command_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (c == '_' || std::isspace(c)) {
      pending_space = true;
      continue;
    }
    if (std::ispunct(c)) continue;
    if (pending_space && !out.empty()) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

inline double planning_accuracy(const std::vector<std::string>& pred_texts,
                                const std::vector<PlanningCommand>& gt_commands) {
  if (pred_texts.size() != gt_commands.size()) {
    throw ValidationError("planning accuracy: prediction/ground-truth length mismatch");
  }
  if (gt_commands.empty()) return 1.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gt_commands.size(); ++i) {
    if (canonical_command_text(pred_texts[i]) ==
        canonical_command_text(to_string(gt_commands[i]))) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(gt_commands.size());
}

}  // namespace drivelang
