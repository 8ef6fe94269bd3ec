#pragma once

// Joins a prediction file against a task-sample file and produces the
// per-task evaluation report. Samples without a usable prediction are
// scored as misses; predictions without a matching sample are counted and
// ignored. Identical inputs always serialize to byte-identical reports.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "drivelang/config.hpp"
#include "drivelang/metrics_grounding.hpp"
#include "drivelang/metrics_lang.hpp"
#include "drivelang/prompt.hpp"
#include "drivelang/types.hpp"
#include "json.hpp"

namespace drivelang {

struct LangSection {
  double bleu{0.0};
  double rouge_l{0.0};
  double cider_raw{0.0};
  double cider_rescaled{0.0};
  std::size_t count{0};
  std::size_t missing{0};
};

struct Vg2dSection {
  double map{0.0};
  double f1{0.0};
  double miou{0.0};
  std::size_t count{0};
  std::size_t missing{0};
};

struct Vg3dSection {
  PrAtKResult pr;
  double map{0.0};
  double f1{0.0};
  std::size_t count{0};
  std::size_t missing{0};
};

struct PlanningSection {
  double accuracy{0.0};
  std::size_t count{0};
  std::size_t missing{0};
};

struct EvalReport {
  std::optional<LangSection> dense_caption;
  std::optional<LangSection> region_description;
  std::optional<LangSection> prediction_task;
  std::optional<Vg2dSection> vg2d;
  std::optional<Vg3dSection> vg3d;
  std::optional<PlanningSection> planning;
  std::size_t n_samples{0};
  std::size_t n_predictions{0};
  std::size_t n_missing_predictions{0};
  std::size_t n_unknown_prediction_ids{0};
};

namespace detail {

inline LangSection eval_lang_section(const std::vector<const TaskSample*>& samples,
                                     const std::map<std::string, const Prediction*>& preds,
                                     const LangParams& params) {
  LangSection section;
  section.count = samples.size();
  TokenizerOptions tokenizer;
  tokenizer.lowercase = params.lowercase;
  tokenizer.strip_punctuation = params.strip_punctuation;
  std::vector<TokenizedPair> pairs;
  pairs.reserve(samples.size());
  for (const TaskSample* s : samples) {
    auto it = preds.find(s->sample_id);
    std::string candidate;
    if (it != preds.end() && it->second->text.has_value()) {
      candidate = *it->second->text;
    } else {
      ++section.missing;
    }
    pairs.push_back(make_pair_from_text(candidate, {s->answer}, tokenizer));
  }
  if (pairs.empty()) return section;
  BleuOptions bleu_opts;
  bleu_opts.max_n = params.bleu_max_n;
  bleu_opts.smoothing_epsilon = params.bleu_smoothing_epsilon;
  section.bleu = bleu(pairs, bleu_opts);
  section.rouge_l = rouge_l(pairs, params.rouge_beta);
  CiderOptions cider_opts;
  cider_opts.sigma = params.cider_sigma;
  section.cider_raw = cider(pairs, cider_opts);
  section.cider_rescaled = rescale_cider(section.cider_raw);
  return section;
}

}  // namespace detail

inline EvalReport evaluate(const std::vector<TaskSample>& samples,
                           const std::vector<Prediction>& predictions,
                           const ToolkitConfig& config) {
  config.validate();
  EvalReport report;
  report.n_samples = samples.size();
  report.n_predictions = predictions.size();

  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : predictions) {
    if (!by_id.emplace(p.sample_id, &p).second) {
      throw ValidationError("duplicate prediction for sample '" + p.sample_id + "'");
    }
  }
  {
    std::set<std::string> sample_ids;
    for (const TaskSample& s : samples) {
      if (!sample_ids.insert(s.sample_id).second) {
        throw ValidationError("duplicate sample_id '" + s.sample_id +
                              "' in the ground truth");
      }
    }
    for (const Prediction& p : predictions) {
      if (sample_ids.count(p.sample_id) == 0) ++report.n_unknown_prediction_ids;
    }
  }

  std::map<TaskKind, std::vector<const TaskSample*>> by_task;
  for (const TaskSample& s : samples) by_task[s.task].push_back(&s);

  for (TaskKind kind : {TaskKind::DenseCaption, TaskKind::RegionDescription,
                        TaskKind::Prediction}) {
    auto it = by_task.find(kind);
    if (it == by_task.end()) continue;
    LangSection section = detail::eval_lang_section(it->second, by_id, config.lang);
    report.n_missing_predictions += section.missing;
    if (kind == TaskKind::DenseCaption) report.dense_caption = section;
    if (kind == TaskKind::RegionDescription) report.region_description = section;
    if (kind == TaskKind::Prediction) report.prediction_task = section;
  }

  if (auto it = by_task.find(TaskKind::VG2D); it != by_task.end()) {
    Vg2dSection section;
    section.count = it->second.size();
    std::vector<GroupedScoredBox2D> preds;
    std::vector<GroupedBox2D> gts;
    std::size_t group = 0;
    for (const TaskSample* s : it->second) {
      for (const Box2D& b : s->target_boxes_2d) gts.push_back({group, b});
      auto pit = by_id.find(s->sample_id);
      bool have_boxes = false;
      if (pit != by_id.end()) {
        const Prediction& p = *pit->second;
        if (!p.boxes_2d.empty()) {
          for (const ScoredBox2D& b : p.boxes_2d) {
            preds.push_back({group, b.box, b.confidence});
          }
          have_boxes = true;
        } else if (p.text.has_value()) {
          // Free-form output: extract the first normalized box string, map it
          // back to pixels; unparseable text stays a miss, not an error.
          if (auto parsed = parse_box2d_string(*p.text)) {
            preds.push_back({group,
                             denormalize_box2d(*parsed, config.pipeline.image_width,
                                               config.pipeline.image_height),
                             1.0});
            have_boxes = true;
          }
        }
      }
      if (!have_boxes) ++section.missing;
      ++group;
    }
    report.n_missing_predictions += section.missing;
    const Vg2dMetrics m =
        vg2d_metrics_grouped(preds, gts, config.eval.vg2d_f1_iou_thresh);
    section.map = m.map;
    section.f1 = m.f1;
    section.miou = m.miou;
    report.vg2d = section;
  }

  if (auto it = by_task.find(TaskKind::VG3D); it != by_task.end()) {
    Vg3dSection section;
    section.count = it->second.size();
    PrAtKAccumulator pr_acc(config.eval.pr_ks);
    MatchCounts f1_counts;
    std::map<std::string, std::vector<GroupedScoredBox3D>> map_preds;
    std::map<std::string, std::vector<GroupedBox3D>> map_gts;
    std::size_t group = 0;
    for (const TaskSample* s : it->second) {
      const std::string gt_category = s->category.value_or("unspecified");
      std::vector<Box3D> pred_boxes;
      auto pit = by_id.find(s->sample_id);
      if (pit != by_id.end() && !pit->second->boxes_3d.empty()) {
        for (const ScoredBox3D& b : pit->second->boxes_3d) {
          pred_boxes.push_back(b.box);
          map_preds[b.category].push_back({group, b.box, b.confidence});
        }
      } else {
        ++section.missing;
      }
      for (const Box3D& b : s->target_boxes_3d) {
        map_gts[gt_category].push_back({group, b});
      }
      pr_acc.add(pred_boxes, s->target_boxes_3d);
      f1_counts += f1_counts_3d(pred_boxes, s->target_boxes_3d,
                                config.eval.f1_iou_thresh_3d);
      ++group;
    }
    report.n_missing_predictions += section.missing;
    section.pr = pr_acc.result();
    section.map = map_3d(map_preds, map_gts, config.eval.map_dist_thresh);
    section.f1 = prf_from_counts(f1_counts).f1;
    report.vg3d = section;
  }

  if (auto it = by_task.find(TaskKind::Planning); it != by_task.end()) {
    PlanningSection section;
    section.count = it->second.size();
    std::vector<std::string> pred_texts;
    std::vector<PlanningCommand> gt_commands;
    for (const TaskSample* s : it->second) {
      PlanningCommand command = PlanningCommand::GoStraight;
      bool parsed = false;
      for (PlanningCommand c : {PlanningCommand::TurnLeft, PlanningCommand::TurnRight,
                                PlanningCommand::GoStraight}) {
        if (canonical_command_text(s->answer) == canonical_command_text(to_string(c))) {
          command = c;
          parsed = true;
          break;
        }
      }
      if (!parsed) {
        throw ValidationError("planning sample '" + s->sample_id +
                              "' has a non-command answer '" + s->answer + "'");
      }
      gt_commands.push_back(command);
      auto pit = by_id.find(s->sample_id);
      if (pit != by_id.end() && pit->second->text.has_value()) {
        pred_texts.push_back(*pit->second->text);
      } else {
        pred_texts.push_back("");
        ++section.missing;
      }
    }
    report.n_missing_predictions += section.missing;
    section.accuracy = planning_accuracy(pred_texts, gt_commands);
    report.planning = section;
  }

  return report;
}

// --- serialization -------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json lang_section_json(const LangSection& s) {
  return {{"bleu", s.bleu},
          {"rouge_l", s.rouge_l},
          {"cider", s.cider_raw},
          {"cider_rescaled", s.cider_rescaled},
          {"count", s.count},
          {"missing", s.missing}};
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const EvalReport& report,
                                             const ToolkitConfig& config) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json cfg = config_to_json(config);
  cfg["conventions"] = {{"pr_distance", "xyz"},
                        {"map_distance", "bev"},
                        {"cider_variant", "CIDEr-D"},
                        {"ap_interpolation", "101-point"},
                        {"vg2d_map_iou_thresholds", coco_iou_thresholds()}};
  j["config"] = cfg;
  j["counts"] = {{"samples", report.n_samples},
                 {"predictions", report.n_predictions},
                 {"missing_predictions", report.n_missing_predictions},
                 {"unknown_prediction_ids", report.n_unknown_prediction_ids}};
  nlohmann::ordered_json tasks;
  if (report.dense_caption) {
    tasks["dense_caption"] = detail::lang_section_json(*report.dense_caption);
  }
  if (report.region_description) {
    tasks["region_description"] = detail::lang_section_json(*report.region_description);
  }
  if (report.prediction_task) {
    tasks["prediction"] = detail::lang_section_json(*report.prediction_task);
  }
  if (report.vg2d) {
    tasks["vg2d"] = {{"map", report.vg2d->map},
                     {"f1", report.vg2d->f1},
                     {"miou", report.vg2d->miou},
                     {"count", report.vg2d->count},
                     {"missing", report.vg2d->missing}};
  }
  if (report.vg3d) {
    nlohmann::ordered_json per_k;
    for (std::size_t i = 0; i < report.vg3d->pr.ks.size(); ++i) {
      per_k[format_float(report.vg3d->pr.ks[i])] = report.vg3d->pr.per_k[i];
    }
    tasks["vg3d"] = {{"pr", report.vg3d->pr.mean},
                     {"pr_at", per_k},
                     {"map", report.vg3d->map},
                     {"f1", report.vg3d->f1},
                     {"count", report.vg3d->count},
                     {"missing", report.vg3d->missing}};
  }
  if (report.planning) {
    tasks["planning"] = {{"accuracy", report.planning->accuracy},
                         {"count", report.planning->count},
                         {"missing", report.planning->missing}};
  }
  j["tasks"] = tasks;
  return j;
}

inline std::string serialize_report(const EvalReport& report,
                                    const ToolkitConfig& config) {
  return report_to_json(report, config).dump(2) + "\n";
}

}  // namespace drivelang
