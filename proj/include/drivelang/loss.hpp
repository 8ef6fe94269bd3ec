#pragma once

// Numeric reference for the 3D detection objective: Hungarian target
// assignment, focal classification loss, and L1 box regression, with
// analytic gradients for every probability and box component. The gradient
// treats the assignment as fixed, as in detection training.

#include <array>
#include <cmath>
#include <vector>

#include "drivelang/assignment.hpp"
#include "drivelang/types.hpp"

namespace drivelang {

// Per-query class probabilities over the category set plus one background
// slot (the last entry). Entries must lie strictly inside (0, 1).
using ClassProbs = std::vector<double>;

// (cx, cy, cz, log l, log w, log h, sin yaw, cos yaw)
struct BoxEncoding {
  std::array<double, 8> v{0, 0, 0, 0, 0, 0, 0, 1};

  void validate() const {
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw ValidationError("box encoding: components must be finite");
      }
    }
    const double norm = std::hypot(v[6], v[7]);
    if (norm < 0.5 || norm > 2.0) {
      throw ValidationError("box encoding: (sin, cos) norm outside [0.5, 2]");
    }
  }

  bool operator==(const BoxEncoding&) const = default;
};

inline BoxEncoding encode_box3d(const Box3D& b) {
  BoxEncoding e;
  e.v = {b.cx,          b.cy,          b.cz,          std::log(b.l),
         std::log(b.w), std::log(b.h), std::sin(b.yaw), std::cos(b.yaw)};
  return e;
}

struct LossWeights {
  double lambda{2.0};       // classification weight
  double gamma{0.25};       // regression weight
  double focal_alpha{0.25};
  double focal_gamma{2.0};  // focal exponent, distinct from `gamma`

  void validate() const {
    if (!(lambda > 0.0 && gamma > 0.0 && focal_alpha > 0.0 && focal_gamma > 0.0)) {
      throw ValidationError("loss weights must be positive");
    }
  }
};

struct GtBox {
  std::size_t category{0};  // index into the class portion of ClassProbs
  BoxEncoding box;
};

// gt_for_query[q] is the matched ground-truth index or -1 for background.
struct TargetMatching {
  std::vector<int> gt_for_query;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (query, gt)
  double cost{0.0};
};

// Mean absolute difference over the eight encoding components.
inline double l1_loss(const BoxEncoding& pred, const BoxEncoding& gt) {
  double sum = 0.0;
  for (std::size_t d = 0; d < 8; ++d) sum += std::abs(pred.v[d] - gt.v[d]);
  return sum / 8.0;
}

namespace detail {

inline void check_probs(const std::vector<ClassProbs>& probs) {
  for (const ClassProbs& p : probs) {
    if (p.size() < 2) {
      throw ValidationError("class probs need at least one class plus background");
    }
    for (double x : p) {
      if (!(x > 0.0 && x < 1.0)) {
        throw ValidationError("class probability outside (0, 1)");
      }
    }
  }
}

}  // namespace detail

// Hungarian matching with cost(query, gt) = lambda * (1 - p[gt class]) +
// gamma * l1_loss(box, gt box), mirroring the loss weights.
inline TargetMatching assign_targets(const std::vector<ClassProbs>& probs,
                                     const std::vector<BoxEncoding>& boxes,
                                     const std::vector<GtBox>& gt,
                                     const LossWeights& weights = {}) {
  weights.validate();
  detail::check_probs(probs);
  if (probs.size() != boxes.size()) {
    throw ValidationError("assign_targets: probs/boxes size mismatch");
  }
  if (probs.size() < gt.size()) {
    throw ValidationError("assign_targets: needs at least as many queries as GTs");
  }
  TargetMatching m;
  m.gt_for_query.assign(probs.size(), -1);
  if (gt.empty()) return m;
  CostMatrix costs(probs.size(), gt.size());
  for (std::size_t q = 0; q < probs.size(); ++q) {
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].category + 1 >= probs[q].size()) {
        throw ValidationError("assign_targets: GT category out of range");
      }
      costs.at(q, g) = weights.lambda * (1.0 - probs[q][gt[g].category]) +
                       weights.gamma * l1_loss(boxes[q], gt[g].box);
    }
  }
  const Assignment asg = hungarian(costs);
  m.pairs = asg.pairs;
  m.cost = asg.total_cost;
  for (const auto& [q, g] : m.pairs) {
    m.gt_for_query[q] = static_cast<int>(g);
  }
  return m;
}

// Sum over queries of -alpha_t (1 - p_t)^focal_gamma log(p_t), normalized by
// the number of GTs (min 1). p_t is the probability of the target class, or
// of the background slot for unmatched queries (with alpha_t = 1 - alpha).
inline double focal_loss(const std::vector<ClassProbs>& probs,
                         const TargetMatching& matching,
                         const std::vector<GtBox>& gt, double alpha = 0.25,
                         double focal_gamma = 2.0) {
  detail::check_probs(probs);
  double sum = 0.0;
  for (std::size_t q = 0; q < probs.size(); ++q) {
    const int g = matching.gt_for_query[q];
    const std::size_t target =
        g < 0 ? probs[q].size() - 1 : gt[static_cast<std::size_t>(g)].category;
    const double alpha_t = g < 0 ? 1.0 - alpha : alpha;
    const double p = probs[q][target];
    sum += -alpha_t * std::pow(1.0 - p, focal_gamma) * std::log(p);
  }
  return sum / static_cast<double>(std::max<std::size_t>(1, gt.size()));
}

struct LossResult {
  double value{0.0};
  double cls_term{0.0};  // focal loss, GT-normalized
  double reg_term{0.0};  // mean per-pair L1
  TargetMatching matching;
  std::vector<ClassProbs> d_probs;           // same shape as probs
  std::vector<std::array<double, 8>> d_boxes;  // same shape as boxes
};

// Loss value and analytic gradient under a fixed matching.
inline LossResult total_loss_with_matching(const std::vector<ClassProbs>& probs,
                                           const std::vector<BoxEncoding>& boxes,
                                           const std::vector<GtBox>& gt,
                                           const LossWeights& weights,
                                           const TargetMatching& matching) {
  weights.validate();
  detail::check_probs(probs);
  LossResult r;
  r.matching = matching;
  r.d_probs.resize(probs.size());
  for (std::size_t q = 0; q < probs.size(); ++q) {
    r.d_probs[q].assign(probs[q].size(), 0.0);
  }
  r.d_boxes.assign(boxes.size(), {0, 0, 0, 0, 0, 0, 0, 0});

  const double gt_norm = static_cast<double>(std::max<std::size_t>(1, gt.size()));
  double cls_sum = 0.0;
  for (std::size_t q = 0; q < probs.size(); ++q) {
    const int g = matching.gt_for_query[q];
    const std::size_t target =
        g < 0 ? probs[q].size() - 1 : gt[static_cast<std::size_t>(g)].category;
    const double alpha_t = g < 0 ? 1.0 - weights.focal_alpha : weights.focal_alpha;
    const double p = probs[q][target];
    const double one_minus = 1.0 - p;
    const double pow_g = std::pow(one_minus, weights.focal_gamma);
    cls_sum += -alpha_t * pow_g * std::log(p);
    // d/dp [-a (1-p)^g log p] = a (g (1-p)^(g-1) log p - (1-p)^g / p)
    const double dfdp =
        alpha_t * (weights.focal_gamma * std::pow(one_minus, weights.focal_gamma - 1.0) *
                       std::log(p) -
                   pow_g / p);
    r.d_probs[q][target] = weights.lambda * dfdp / gt_norm;
  }
  r.cls_term = cls_sum / gt_norm;

  double reg_sum = 0.0;
  if (!matching.pairs.empty()) {
    const double pair_norm = static_cast<double>(matching.pairs.size());
    for (const auto& [q, g] : matching.pairs) {
      reg_sum += l1_loss(boxes[q], gt[g].box);
      for (std::size_t d = 0; d < 8; ++d) {
        const double diff = boxes[q].v[d] - gt[g].box.v[d];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        r.d_boxes[q][d] = weights.gamma * sign / (8.0 * pair_norm);
      }
    }
    reg_sum /= pair_norm;
  }
  r.reg_term = reg_sum;
  r.value = weights.lambda * r.cls_term + weights.gamma * r.reg_term;
  return r;
}

inline LossResult total_loss(const std::vector<ClassProbs>& probs,
                             const std::vector<BoxEncoding>& boxes,
                             const std::vector<GtBox>& gt,
                             const LossWeights& weights = {}) {
  const TargetMatching matching = assign_targets(probs, boxes, gt, weights);
  return total_loss_with_matching(probs, boxes, gt, weights, matching);
}

// Combination rule of the weighted objective, factored out so the scalar
// arithmetic can be pinned by tests.
inline double combine_loss_terms(double cls_term, double reg_term,
                                 const LossWeights& weights = {}) {
  return weights.lambda * cls_term + weights.gamma * reg_term;
}

// Central-finite-difference check of the analytic gradient under a fixed
// matching. Returns the max relative error max(|a - f| / max(1, |a|, |f|))
// over every probability and box component. Probabilities are expected to
// sit at least `step` away from 0 and 1.
inline double gradient_check_max_rel_err(const std::vector<ClassProbs>& probs,
                                         const std::vector<BoxEncoding>& boxes,
                                         const std::vector<GtBox>& gt,
                                         const LossWeights& weights,
                                         const TargetMatching& matching,
                                         double step = 1e-5) {
  const LossResult analytic =
      total_loss_with_matching(probs, boxes, gt, weights, matching);
  double max_err = 0.0;
  auto update = [&](double a, double fd) {
    const double scale = std::max({1.0, std::abs(a), std::abs(fd)});
    max_err = std::max(max_err, std::abs(a - fd) / scale);
  };

  std::vector<ClassProbs> p = probs;
  for (std::size_t q = 0; q < p.size(); ++q) {
    for (std::size_t k = 0; k < p[q].size(); ++k) {
      const double saved = p[q][k];
      p[q][k] = saved + step;
      const double hi = total_loss_with_matching(p, boxes, gt, weights, matching).value;
      p[q][k] = saved - step;
      const double lo = total_loss_with_matching(p, boxes, gt, weights, matching).value;
      p[q][k] = saved;
      update(analytic.d_probs[q][k], (hi - lo) / (2.0 * step));
    }
  }
  std::vector<BoxEncoding> b = boxes;
  for (std::size_t q = 0; q < b.size(); ++q) {
    for (std::size_t d = 0; d < 8; ++d) {
      const double saved = b[q].v[d];
      b[q].v[d] = saved + step;
      const double hi = total_loss_with_matching(probs, b, gt, weights, matching).value;
      b[q].v[d] = saved - step;
      const double lo = total_loss_with_matching(probs, b, gt, weights, matching).value;
      b[q].v[d] = saved;
      update(analytic.d_boxes[q][d], (hi - lo) / (2.0 * step));
    }
  }
  return max_err;
}

}  // namespace drivelang
