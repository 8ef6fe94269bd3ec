#pragma once

// Dataset-construction engine: IoU-priority dedup of multi-source object
// records, ITM filtering, templated task-sample generation, and dense-caption
// prompt assembly/ingestion. Every stage is a pure function of its inputs
// plus the seeded config, so rebuilds are byte-identical.

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "drivelang/geometry.hpp"
#include "drivelang/hash.hpp"
#include "drivelang/prompt.hpp"
#include "drivelang/records.hpp"
#include "drivelang/types.hpp"

namespace drivelang {

// Prompt templates per task kind. Placeholders: {view}, {category}, {box2d},
// {description}, {distance}, {attributes}, {command}.
using TaskTemplates = std::map<TaskKind, std::vector<std::string>>;

inline TaskTemplates default_templates() {
  return TaskTemplates{
      {TaskKind::DenseCaption,
       {"Describe the surrounding scene in detail, covering all notable "
        "objects in every view.",
        "Give a detailed description of everything around the ego vehicle."}},
      {TaskKind::RegionDescription,
       {"Describe the object located at {box2d} in the {view} view.",
        "What is in the region {box2d} of the {view} camera?"}},
      {TaskKind::VG2D,
       {"Provide the 2D bounding box of the object in the {view} view "
        "described as: {description}",
        "Locate this object in the {view} view and output its 2D box: "
        "{description}"}},
      {TaskKind::Prediction,
       {"What is the motion state of the {category} at {box2d} in the {view} "
        "view?",
        "Predict the behavior of the object at {box2d} in the {view} view."}},
      {TaskKind::Planning,
       {"What should the ego vehicle do next?",
        "Based on the surrounding scene, choose the next high-level "
        "maneuver."}},
      {TaskKind::VG3D,
       {"Locate every {category} in the {view} view and output their 3D "
        "bounding boxes.",
        "Find all 3D boxes of the {category} objects visible in the {view} "
        "view."}}};
}

inline const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> known = {
      "view", "category", "box2d", "description", "distance", "attributes",
      "command"};
  return known;
}

struct PipelineConfig {
  double dedup_iou_thresh{0.5};
  double itm_thresh{0.5};
  TaskTemplates templates{default_templates()};
  std::uint64_t seed{0};
  CategorySet categories{};
  double image_width{1600.0};
  double image_height{900.0};

  void validate() const {
    if (!(dedup_iou_thresh > 0.0 && dedup_iou_thresh < 1.0)) {
      throw ValidationError("pipeline.dedup_iou_thresh must lie in (0, 1)");
    }
    if (!(itm_thresh > 0.0 && itm_thresh < 1.0)) {
      throw ValidationError("pipeline.itm_thresh must lie in (0, 1)");
    }
    if (!(image_width > 0.0 && image_height > 0.0)) {
      throw ValidationError("image dimensions must be positive");
    }
    for (TaskKind t : kAllTasks) {
      auto it = templates.find(t);
      if (it == templates.end() || it->second.empty()) {
        throw ValidationError("pipeline.templates: task '" +
                              std::string(to_string(t)) +
                              "' needs at least one template");
      }
      for (const std::string& tpl : it->second) {
        validate_template(tpl);
      }
    }
  }

  static void validate_template(const std::string& tpl) {
    std::size_t pos = 0;
    while ((pos = tpl.find('{', pos)) != std::string::npos) {
      const std::size_t close = tpl.find('}', pos);
      if (close == std::string::npos) {
        throw ValidationError("template '" + tpl + "' has an unclosed '{'");
      }
      const std::string name = tpl.substr(pos + 1, close - pos - 1);
      if (known_placeholders().count(name) == 0) {
        throw ValidationError("template '" + tpl +
                              "' references unknown placeholder '" + name + "'");
      }
      pos = close + 1;
    }
  }
};

// --- dedup and filtering ------------------------------------------------------

// Within each view, suppresses a record whose 2D IoU with an already-kept
// record reaches iou_thresh. Keep order: ground truth first, then
// region-to-text, then seg-caption; earlier records win inside a source.
// Ground-truth records are never suppressed, output preserves input order,
// and the operation is idempotent.
inline std::vector<ObjectRecord> dedup_records(const std::vector<ObjectRecord>& records,
                                               double iou_thresh) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return source_priority(records[a].source) < source_priority(records[b].source);
  });
  std::vector<char> kept(records.size(), 0);
  std::vector<std::size_t> kept_order;
  for (std::size_t idx : order) {
    const ObjectRecord& r = records[idx];
    bool suppressed = false;
    if (r.source != SourceTag::GroundTruth) {
      for (std::size_t k : kept_order) {
        if (records[k].view != r.view) continue;
        if (iou_2d(records[k].box2d, r.box2d) >= iou_thresh) {
          suppressed = true;
          break;
        }
      }
    }
    if (!suppressed) {
      kept[idx] = 1;
      kept_order.push_back(idx);
    }
  }
  std::vector<ObjectRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (kept[i]) out.push_back(records[i]);
  }
  return out;
}

// Drops non-ground-truth records scoring below itm_thresh. Ground-truth
// records always survive.
inline std::vector<ObjectRecord> itm_filter(const std::vector<ObjectRecord>& records,
                                            double itm_thresh) {
  std::vector<ObjectRecord> out;
  out.reserve(records.size());
  for (const ObjectRecord& r : records) {
    if (r.source == SourceTag::GroundTruth) {
      out.push_back(r);
      continue;
    }
    if (r.itm_score.has_value() && *r.itm_score >= itm_thresh) {
      out.push_back(r);
    }
  }
  return out;
}

// --- task generation -----------------------------------------------------------

namespace detail {

inline std::uint64_t template_hash(const std::string& frame_id, const std::string& key,
                                   TaskKind task, std::uint64_t seed) {
  std::uint64_t h = fnv1a(frame_id);
  h = fnv1a("\x1f", h);
  h = fnv1a(key, h);
  h = fnv1a("\x1f", h);
  h = fnv1a(to_string(task), h);
  h = fnv1a_u64(seed, h);
  return h;
}

inline std::string join(const std::vector<std::string>& parts,
                        const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

struct TemplateValues {
  std::map<std::string, std::string> by_name;
};

inline std::string render_template(const std::string& tpl, const TemplateValues& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t open = tpl.find('{', pos);
    if (open == std::string::npos) {
      out += tpl.substr(pos);
      break;
    }
    out += tpl.substr(pos, open - pos);
    const std::size_t close = tpl.find('}', open);
    const std::string name = tpl.substr(open + 1, close - open - 1);
    auto it = values.by_name.find(name);
    out += it == values.by_name.end() ? "" : it->second;
    pos = close + 1;
  }
  return out;
}

inline std::string pick_template(const PipelineConfig& config, TaskKind task,
                                 const std::string& frame_id, const std::string& key) {
  const std::vector<std::string>& pool = config.templates.at(task);
  const std::uint64_t h = template_hash(frame_id, key, task, config.seed);
  return pool[h % pool.size()];
}

inline std::string render_box3d_text(const Box3D& b) {
  return "(" + format_float(b.cx) + ", " + format_float(b.cy) + ", " +
         format_float(b.cz) + ", " + format_float(b.l) + ", " +
         format_float(b.w) + ", " + format_float(b.h) + ", " +
         format_float(printable_yaw(b.yaw)) + ")";
}

inline TemplateValues record_values(const ObjectRecord& r, const PipelineConfig& config) {
  TemplateValues v;
  v.by_name["view"] = view_phrase(r.view);
  v.by_name["category"] = r.category;
  v.by_name["box2d"] = normalize_box2d(r.box2d, config.image_width, config.image_height);
  v.by_name["description"] = r.description;
  v.by_name["attributes"] = join(r.attributes, ", ");
  v.by_name["distance"] = r.distance ? format_float(*r.distance) : "";
  return v;
}

}  // namespace detail

// Emits, in deterministic order per frame:
//   - one dense-caption sample when the frame carries a caption,
//   - region-description and 2D grounding samples from every surviving
//     record (all sources),
//   - prediction samples from ground-truth records only,
//   - 3D grounding samples grouped per (view, category) over ground-truth
//     records, each answer referencing all 3D boxes of that group,
//   - one planning sample.
// Records with an empty description skip the description-driven tasks, and
// prediction samples require at least one attribute.
inline std::vector<TaskSample> generate_tasks(const Frame& frame,
                                              const PipelineConfig& config) {
  config.validate();
  std::vector<TaskSample> samples;
  auto prompt_for = [&](TaskKind task, const std::string& key,
                        const detail::TemplateValues& values, bool surround) {
    const std::string body = detail::render_template(
        detail::pick_template(config, task, frame.frame_id, key), values);
    if (surround) {
      return build_surround_prompt(task) + "\n" + body;
    }
    return std::string(kSingleImagePromptV1) + body;
  };

  if (frame.caption && !frame.caption->empty()) {
    TaskSample s;
    s.sample_id = frame.frame_id + "/dense_caption";
    s.task = TaskKind::DenseCaption;
    s.view = kSurroundView;
    s.prompt = prompt_for(TaskKind::DenseCaption, "", {}, true);
    s.answer = *frame.caption;
    samples.push_back(std::move(s));
  }

  for (const ObjectRecord& r : frame.records) {
    const detail::TemplateValues values = detail::record_values(r, config);
    if (!r.description.empty()) {
      TaskSample rd;
      rd.sample_id = frame.frame_id + "/region_description/" + r.object_id;
      rd.task = TaskKind::RegionDescription;
      rd.view = std::string(to_string(r.view));
      rd.prompt = prompt_for(TaskKind::RegionDescription, r.object_id, values, false);
      rd.answer = r.description;
      samples.push_back(std::move(rd));

      TaskSample vg;
      vg.sample_id = frame.frame_id + "/vg2d/" + r.object_id;
      vg.task = TaskKind::VG2D;
      vg.view = std::string(to_string(r.view));
      vg.prompt = prompt_for(TaskKind::VG2D, r.object_id, values, false);
      vg.answer = normalize_box2d(r.box2d, config.image_width, config.image_height);
      vg.target_boxes_2d = {r.box2d};
      samples.push_back(std::move(vg));
    }
  }

  for (const ObjectRecord& r : frame.records) {
    if (r.source != SourceTag::GroundTruth || r.attributes.empty()) continue;
    const detail::TemplateValues values = detail::record_values(r, config);
    TaskSample s;
    s.sample_id = frame.frame_id + "/prediction/" + r.object_id;
    s.task = TaskKind::Prediction;
    s.view = std::string(to_string(r.view));
    s.prompt = prompt_for(TaskKind::Prediction, r.object_id, values, false);
    s.answer = detail::join(r.attributes, ", ");
    samples.push_back(std::move(s));
  }

  // 3D grounding groups in fixed view order, categories in configured order.
  for (View view : kViewOrder) {
    for (const std::string& category : config.categories.names()) {
      std::vector<Box3D> boxes;
      for (const ObjectRecord& r : frame.records) {
        if (r.source == SourceTag::GroundTruth && r.view == view &&
            r.category == category && r.box3d) {
          boxes.push_back(*r.box3d);
        }
      }
      if (boxes.empty()) continue;
      detail::TemplateValues values;
      values.by_name["view"] = view_phrase(view);
      values.by_name["category"] = category;
      TaskSample s;
      s.sample_id = frame.frame_id + "/vg3d/" + std::string(to_string(view)) + ":" +
                    category;
      s.task = TaskKind::VG3D;
      s.view = std::string(to_string(view));
      s.category = category;
      s.prompt = prompt_for(TaskKind::VG3D, category, values, true);
      std::vector<std::string> rendered;
      rendered.reserve(boxes.size());
      for (const Box3D& b : boxes) rendered.push_back(detail::render_box3d_text(b));
      s.answer = detail::join(rendered, "; ");
      s.target_boxes_3d = std::move(boxes);
      samples.push_back(std::move(s));
    }
  }

  {
    detail::TemplateValues values;
    values.by_name["command"] = command_phrase(frame.planning_command);
    TaskSample s;
    s.sample_id = frame.frame_id + "/planning";
    s.task = TaskKind::Planning;
    s.view = kSurroundView;
    s.prompt = prompt_for(TaskKind::Planning, "", values, true);
    s.answer = command_phrase(frame.planning_command);
    samples.push_back(std::move(s));
  }

  for (const TaskSample& s : samples) s.validate();
  return samples;
}

// --- dense-caption prompts -------------------------------------------------------

struct CaptionPrompt {
  std::string frame_id;
  std::string prompt;
};

// One prompt per frame; surviving records grouped by view in the fixed view
// order, each contributing category, distance, attributes, and description.
inline CaptionPrompt build_caption_prompt(const Frame& frame,
                                          const PipelineConfig& config) {
  CaptionPrompt p;
  p.frame_id = frame.frame_id;
  std::string text =
      "You are given the surround views of an ego vehicle. Write a detailed "
      "dense caption of the driving scene that covers every listed object "
      "with its location, category, attributes, and distance.\n";
  for (View view : kViewOrder) {
    std::string section;
    for (const ObjectRecord& r : frame.records) {
      if (r.view != view) continue;
      section += "- " + r.category;
      section += " at " + normalize_box2d(r.box2d, config.image_width,
                                          config.image_height);
      if (r.distance) {
        section += ", " + format_float(*r.distance) + " m away";
      }
      if (!r.attributes.empty()) {
        section += ", " + detail::join(r.attributes, ", ");
      }
      if (!r.description.empty()) {
        section += ": " + r.description;
      }
      section += "\n";
    }
    if (!section.empty()) {
      text += "[" + view_phrase(view) + "]\n" + section;
    }
  }
  p.prompt = text;
  return p;
}

inline std::vector<CaptionPrompt> build_caption_prompts(const std::vector<Frame>& frames,
                                                        const PipelineConfig& config) {
  std::vector<CaptionPrompt> out;
  out.reserve(frames.size());
  for (const Frame& f : frames) out.push_back(build_caption_prompt(f, config));
  return out;
}

struct IngestReport {
  std::size_t updated{0};
  std::vector<std::string> unknown_ids;
  std::vector<std::string> failed_ids;  // responses carrying an error entry
};

// Writes caption responses back onto their frames. Duplicate frame ids in the
// responses are an error; unknown ids are reported, not fatal.
inline IngestReport ingest_captions(std::vector<Frame>& frames,
                                    const std::vector<CaptionResponse>& responses) {
  IngestReport report;
  std::map<std::string, Frame*> by_id;
  for (Frame& f : frames) by_id[f.frame_id] = &f;
  std::set<std::string> seen;
  for (const CaptionResponse& r : responses) {
    if (!seen.insert(r.frame_id).second) {
      throw ValidationError("duplicate caption response for frame '" + r.frame_id +
                            "'");
    }
    auto it = by_id.find(r.frame_id);
    if (it == by_id.end()) {
      report.unknown_ids.push_back(r.frame_id);
      continue;
    }
    if (!r.error.empty()) {
      report.failed_ids.push_back(r.frame_id);
      continue;
    }
    it->second->caption = r.text;
    ++report.updated;
  }
  return report;
}

// --- whole-pipeline run ------------------------------------------------------------

struct BuildStats {
  std::size_t frames{0};
  std::size_t records_in{0};
  std::size_t dedup_dropped{0};
  std::size_t itm_dropped{0};
  std::size_t records_out{0};
  std::map<TaskKind, std::size_t> samples_per_task;
};

struct BuildResult {
  std::vector<Frame> processed_frames;  // deduped + filtered
  std::vector<TaskSample> samples;
  std::vector<CaptionPrompt> prompts;
  BuildStats stats;
};

// dedup -> itm filter -> task generation -> caption prompt assembly, frame
// order preserved.
inline BuildResult run_build(const std::vector<Frame>& frames,
                             const PipelineConfig& config) {
  config.validate();
  BuildResult result;
  result.stats.frames = frames.size();
  for (const Frame& frame : frames) {
    Frame processed = frame;
    result.stats.records_in += frame.records.size();
    processed.records = dedup_records(processed.records, config.dedup_iou_thresh);
    result.stats.dedup_dropped += frame.records.size() - processed.records.size();
    const std::size_t after_dedup = processed.records.size();
    processed.records = itm_filter(processed.records, config.itm_thresh);
    result.stats.itm_dropped += after_dedup - processed.records.size();
    result.stats.records_out += processed.records.size();

    std::vector<TaskSample> samples = generate_tasks(processed, config);
    for (const TaskSample& s : samples) {
      ++result.stats.samples_per_task[s.task];
    }
    result.prompts.push_back(build_caption_prompt(processed, config));
    result.processed_frames.push_back(std::move(processed));
    result.samples.insert(result.samples.end(),
                          std::make_move_iterator(samples.begin()),
                          std::make_move_iterator(samples.end()));
  }
  return result;
}

}  // namespace drivelang
