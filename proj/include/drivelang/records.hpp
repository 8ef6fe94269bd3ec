#pragma once

// Line-delimited record formats (frames, task samples, predictions,
// caption prompts/responses). One JSON object per line, UTF-8, fixed key
// order, floating-point fields rendered with six decimal places. See
// docs/formats.md for the field-level schema.

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "drivelang/types.hpp"
#include "json.hpp"

namespace drivelang {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message),
        line_(line),
        message_(message) {}
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

// Canonical rendering of a floating-point field: fixed six decimals.
inline std::string format_float(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return std::string(buf);
}

// Yaw written to disk is clamped to [-3.141592, 3.141592] so the quantized
// value always parses back inside (-pi, pi] without renormalization.
inline double printable_yaw(double yaw) {
  return std::clamp(yaw, -3.141592, 3.141592);
}

namespace detail {

inline std::string json_string(const std::string& s) {
  return nlohmann::json(s).dump();
}

class LineWriter {
 public:
  void key(const std::string& k) {
    if (!first_) out_ += ',';
    first_ = false;
    out_ += json_string(k);
    out_ += ':';
  }
  void raw(const std::string& v) { out_ += v; }
  void str(const std::string& v) { out_ += json_string(v); }
  void num(double v) { out_ += format_float(v); }

  void field_str(const std::string& k, const std::string& v) {
    key(k);
    str(v);
  }
  void field_num(const std::string& k, double v) {
    key(k);
    num(v);
  }

  std::string finish() { return "{" + out_ + "}"; }

 private:
  std::string out_;
  bool first_ = true;
};

inline std::string box2d_json(const Box2D& b) {
  return "[" + format_float(b.x1) + "," + format_float(b.y1) + "," +
         format_float(b.x2) + "," + format_float(b.y2) + "]";
}

inline std::string box3d_json(const Box3D& b) {
  return "[" + format_float(b.cx) + "," + format_float(b.cy) + "," +
         format_float(b.cz) + "," + format_float(b.l) + "," +
         format_float(b.w) + "," + format_float(b.h) + "," +
         format_float(printable_yaw(b.yaw)) + "]";
}

// --- parsing helpers -------------------------------------------------------

inline const nlohmann::json& require(const nlohmann::json& obj,
                                     const std::string& field,
                                     const std::string& context) {
  auto it = obj.find(field);
  if (it == obj.end()) {
    throw std::runtime_error(context + ": missing field '" + field + "'");
  }
  return *it;
}

inline std::string get_string(const nlohmann::json& obj, const std::string& field,
                              const std::string& context) {
  const auto& v = require(obj, field, context);
  if (!v.is_string()) {
    throw std::runtime_error(context + ": field '" + field + "' must be a string");
  }
  return v.get<std::string>();
}

inline double get_number(const nlohmann::json& v, const std::string& field,
                         const std::string& context) {
  if (!v.is_number()) {
    throw std::runtime_error(context + ": field '" + field + "' must be a number");
  }
  return v.get<double>();
}

inline Box2D parse_box2d_array(const nlohmann::json& v, const std::string& context) {
  if (!v.is_array() || v.size() != 4) {
    throw std::runtime_error(context + ": box2d must be an array of 4 numbers");
  }
  try {
    return Box2D(get_number(v[0], "box2d[0]", context),
                 get_number(v[1], "box2d[1]", context),
                 get_number(v[2], "box2d[2]", context),
                 get_number(v[3], "box2d[3]", context));
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
}

inline Box3D parse_box3d_array(const nlohmann::json& v, const std::string& context) {
  if (!v.is_array() || v.size() != 7) {
    throw std::runtime_error(context + ": box3d must be an array of 7 numbers");
  }
  try {
    return Box3D(get_number(v[0], "box3d[0]", context),
                 get_number(v[1], "box3d[1]", context),
                 get_number(v[2], "box3d[2]", context),
                 get_number(v[3], "box3d[3]", context),
                 get_number(v[4], "box3d[4]", context),
                 get_number(v[5], "box3d[5]", context),
                 get_number(v[6], "box3d[6]", context));
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
}

}  // namespace detail

// --- frames ----------------------------------------------------------------

inline std::string serialize_record(const ObjectRecord& r) {
  detail::LineWriter w;
  w.field_str("object_id", r.object_id);
  w.field_str("source", std::string(to_string(r.source)));
  w.field_str("view", std::string(to_string(r.view)));
  w.field_str("category", r.category);
  w.key("box2d");
  w.raw(detail::box2d_json(r.box2d));
  if (r.box3d) {
    w.key("box3d");
    w.raw(detail::box3d_json(*r.box3d));
  }
  w.field_str("description", r.description);
  w.key("attributes");
  std::string attrs = "[";
  for (std::size_t i = 0; i < r.attributes.size(); ++i) {
    if (i) attrs += ',';
    attrs += detail::json_string(r.attributes[i]);
  }
  attrs += "]";
  w.raw(attrs);
  if (r.distance) w.field_num("distance", *r.distance);
  if (r.itm_score) w.field_num("itm_score", *r.itm_score);
  return w.finish();
}

inline std::string serialize_frame(const Frame& f) {
  detail::LineWriter w;
  w.field_str("scene_id", f.scene_id);
  w.field_str("frame_id", f.frame_id);
  w.field_str("planning_command", std::string(to_string(f.planning_command)));
  if (f.caption) w.field_str("caption", *f.caption);
  w.key("images");
  std::string imgs = "{";
  for (std::size_t i = 0; i < kNumViews; ++i) {
    if (i) imgs += ',';
    imgs += detail::json_string(std::string(to_string(kViewOrder[i])));
    imgs += ':';
    imgs += detail::json_string(f.images[i]);
  }
  imgs += "}";
  w.raw(imgs);
  w.key("records");
  std::string recs = "[";
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    if (i) recs += ',';
    recs += serialize_record(f.records[i]);
  }
  recs += "]";
  w.raw(recs);
  return w.finish();
}

inline std::string serialize_frames(const std::vector<Frame>& frames) {
  std::string out;
  for (const Frame& f : frames) {
    out += serialize_frame(f);
    out += '\n';
  }
  return out;
}

inline ObjectRecord parse_record_json(const nlohmann::json& j) {
  std::string id = detail::get_string(j, "object_id", "record");
  const std::string ctx = "record '" + id + "'";
  ObjectRecord r;
  r.object_id = std::move(id);
  r.source = parse_source_tag(detail::get_string(j, "source", ctx));
  r.view = parse_view(detail::get_string(j, "view", ctx));
  r.category = detail::get_string(j, "category", ctx);
  r.box2d = detail::parse_box2d_array(detail::require(j, "box2d", ctx), ctx);
  if (auto it = j.find("box3d"); it != j.end() && !it->is_null()) {
    r.box3d = detail::parse_box3d_array(*it, ctx);
  }
  r.description = detail::get_string(j, "description", ctx);
  const auto& attrs = detail::require(j, "attributes", ctx);
  if (!attrs.is_array()) {
    throw std::runtime_error(ctx + ": field 'attributes' must be an array");
  }
  for (const auto& a : attrs) {
    if (!a.is_string()) {
      throw std::runtime_error(ctx + ": attributes must be strings");
    }
    r.attributes.push_back(a.get<std::string>());
  }
  if (auto it = j.find("distance"); it != j.end() && !it->is_null()) {
    r.distance = detail::get_number(*it, "distance", ctx);
  }
  if (auto it = j.find("itm_score"); it != j.end() && !it->is_null()) {
    r.itm_score = detail::get_number(*it, "itm_score", ctx);
  }
  return r;
}

inline Frame parse_frame_json(const nlohmann::json& j, const CategorySet& categories) {
  Frame f;
  f.scene_id = detail::get_string(j, "scene_id", "frame");
  f.frame_id = detail::get_string(j, "frame_id", "frame");
  const std::string ctx = "frame '" + f.frame_id + "'";
  f.planning_command =
      parse_planning_command(detail::get_string(j, "planning_command", ctx));
  if (auto it = j.find("caption"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) {
      throw std::runtime_error(ctx + ": field 'caption' must be a string");
    }
    f.caption = it->get<std::string>();
  }
  const auto& imgs = detail::require(j, "images", ctx);
  if (!imgs.is_object() || imgs.size() != kNumViews) {
    throw std::runtime_error(ctx + ": 'images' must map exactly the six views");
  }
  for (std::size_t i = 0; i < kNumViews; ++i) {
    const std::string key(to_string(kViewOrder[i]));
    f.images[i] = detail::get_string(imgs, key, ctx + ".images");
  }
  const auto& recs = detail::require(j, "records", ctx);
  if (!recs.is_array()) {
    throw std::runtime_error(ctx + ": field 'records' must be an array");
  }
  for (const auto& rj : recs) {
    f.records.push_back(parse_record_json(rj));
  }
  f.validate(categories);
  return f;
}

namespace detail {

// Runs `fn` per nonempty line, wrapping any failure in a ParseError that
// names the line number.
template <typename Fn>
inline void for_each_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(j);
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

}  // namespace detail

inline std::vector<Frame> parse_frames(std::istream& in,
                                       const CategorySet& categories = CategorySet()) {
  std::vector<Frame> frames;
  detail::for_each_line(
      in, [&](const nlohmann::json& j) { frames.push_back(parse_frame_json(j, categories)); });
  return frames;
}

inline std::vector<Frame> parse_frames_string(const std::string& text,
                                              const CategorySet& categories = CategorySet()) {
  std::istringstream in(text);
  return parse_frames(in, categories);
}

// --- task samples ----------------------------------------------------------

inline std::string serialize_sample(const TaskSample& s) {
  detail::LineWriter w;
  w.field_str("sample_id", s.sample_id);
  w.field_str("task", std::string(to_string(s.task)));
  w.field_str("view", s.view);
  if (s.category) w.field_str("category", *s.category);
  w.field_str("prompt", s.prompt);
  w.field_str("answer", s.answer);
  if (!s.target_boxes_2d.empty()) {
    w.key("target_boxes_2d");
    std::string arr = "[";
    for (std::size_t i = 0; i < s.target_boxes_2d.size(); ++i) {
      if (i) arr += ',';
      arr += detail::box2d_json(s.target_boxes_2d[i]);
    }
    arr += "]";
    w.raw(arr);
  }
  if (!s.target_boxes_3d.empty()) {
    w.key("target_boxes_3d");
    std::string arr = "[";
    for (std::size_t i = 0; i < s.target_boxes_3d.size(); ++i) {
      if (i) arr += ',';
      arr += detail::box3d_json(s.target_boxes_3d[i]);
    }
    arr += "]";
    w.raw(arr);
  }
  return w.finish();
}

inline std::string serialize_samples(const std::vector<TaskSample>& samples) {
  std::string out;
  for (const TaskSample& s : samples) {
    out += serialize_sample(s);
    out += '\n';
  }
  return out;
}

inline TaskSample parse_sample_json(const nlohmann::json& j) {
  TaskSample s;
  s.sample_id = detail::get_string(j, "sample_id", "sample");
  const std::string ctx = "sample '" + s.sample_id + "'";
  s.task = parse_task_kind(detail::get_string(j, "task", ctx));
  s.view = detail::get_string(j, "view", ctx);
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    s.category = it->get<std::string>();
  }
  s.prompt = detail::get_string(j, "prompt", ctx);
  s.answer = detail::get_string(j, "answer", ctx);
  if (auto it = j.find("target_boxes_2d"); it != j.end() && !it->is_null()) {
    for (const auto& b : *it) {
      s.target_boxes_2d.push_back(detail::parse_box2d_array(b, ctx));
    }
  }
  if (auto it = j.find("target_boxes_3d"); it != j.end() && !it->is_null()) {
    for (const auto& b : *it) {
      s.target_boxes_3d.push_back(detail::parse_box3d_array(b, ctx));
    }
  }
  s.validate();
  return s;
}

inline std::vector<TaskSample> parse_samples(std::istream& in) {
  std::vector<TaskSample> out;
  detail::for_each_line(
      in, [&](const nlohmann::json& j) { out.push_back(parse_sample_json(j)); });
  return out;
}

inline std::vector<TaskSample> parse_samples_string(const std::string& text) {
  std::istringstream in(text);
  return parse_samples(in);
}

// --- predictions -----------------------------------------------------------

inline std::string serialize_prediction(const Prediction& p) {
  detail::LineWriter w;
  w.field_str("sample_id", p.sample_id);
  if (p.text) w.field_str("text", *p.text);
  if (!p.boxes_3d.empty()) {
    w.key("boxes_3d");
    std::string arr = "[";
    for (std::size_t i = 0; i < p.boxes_3d.size(); ++i) {
      if (i) arr += ',';
      detail::LineWriter e;
      e.key("box");
      e.raw(detail::box3d_json(p.boxes_3d[i].box));
      e.field_str("category", p.boxes_3d[i].category);
      e.field_num("confidence", p.boxes_3d[i].confidence);
      arr += e.finish();
    }
    arr += "]";
    w.raw(arr);
  }
  if (!p.boxes_2d.empty()) {
    w.key("boxes_2d");
    std::string arr = "[";
    for (std::size_t i = 0; i < p.boxes_2d.size(); ++i) {
      if (i) arr += ',';
      detail::LineWriter e;
      e.key("box");
      e.raw(detail::box2d_json(p.boxes_2d[i].box));
      e.field_num("confidence", p.boxes_2d[i].confidence);
      arr += e.finish();
    }
    arr += "]";
    w.raw(arr);
  }
  return w.finish();
}

inline std::string serialize_predictions(const std::vector<Prediction>& preds) {
  std::string out;
  for (const Prediction& p : preds) {
    out += serialize_prediction(p);
    out += '\n';
  }
  return out;
}

inline Prediction parse_prediction_json(const nlohmann::json& j) {
  Prediction p;
  p.sample_id = detail::get_string(j, "sample_id", "prediction");
  const std::string ctx = "prediction '" + p.sample_id + "'";
  if (auto it = j.find("text"); it != j.end() && !it->is_null()) {
    p.text = it->get<std::string>();
  }
  // Confidence is optional: general language models emit none, and ranking
  // then falls back to input order at confidence 1.0.
  auto confidence_of = [&](const nlohmann::json& e) {
    auto cit = e.find("confidence");
    if (cit == e.end() || cit->is_null()) return 1.0;
    return detail::get_number(*cit, "confidence", ctx);
  };
  if (auto it = j.find("boxes_3d"); it != j.end() && !it->is_null()) {
    for (const auto& e : *it) {
      ScoredBox3D b;
      b.box = detail::parse_box3d_array(detail::require(e, "box", ctx), ctx);
      b.category = detail::get_string(e, "category", ctx);
      b.confidence = confidence_of(e);
      p.boxes_3d.push_back(std::move(b));
    }
  }
  if (auto it = j.find("boxes_2d"); it != j.end() && !it->is_null()) {
    for (const auto& e : *it) {
      ScoredBox2D b;
      b.box = detail::parse_box2d_array(detail::require(e, "box", ctx), ctx);
      b.confidence = confidence_of(e);
      p.boxes_2d.push_back(std::move(b));
    }
  }
  p.validate();
  return p;
}

inline std::vector<Prediction> parse_predictions(std::istream& in) {
  std::vector<Prediction> out;
  detail::for_each_line(
      in, [&](const nlohmann::json& j) { out.push_back(parse_prediction_json(j)); });
  return out;
}

inline std::vector<Prediction> parse_predictions_string(const std::string& text) {
  std::istringstream in(text);
  return parse_predictions(in);
}

// --- caption prompts and responses -----------------------------------------

struct CaptionResponse {
  std::string frame_id;
  std::string text;   // model output; empty when an error entry
  std::string error;  // nonempty when the request failed
};

inline std::string serialize_caption_response(const CaptionResponse& r) {
  detail::LineWriter w;
  w.field_str("frame_id", r.frame_id);
  if (r.error.empty()) {
    w.field_str("text", r.text);
  } else {
    w.field_str("error", r.error);
  }
  return w.finish();
}

inline std::vector<CaptionResponse> parse_caption_responses(std::istream& in) {
  std::vector<CaptionResponse> out;
  detail::for_each_line(in, [&](const nlohmann::json& j) {
    CaptionResponse r;
    r.frame_id = detail::get_string(j, "frame_id", "response");
    if (auto it = j.find("error"); it != j.end() && !it->is_null()) {
      r.error = it->get<std::string>();
    } else {
      r.text = detail::get_string(j, "text", "response '" + r.frame_id + "'");
    }
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace drivelang
