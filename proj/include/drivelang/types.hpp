#pragma once

// Shared domain types for the dataset-construction and evaluation toolkit:
// boxes, object records, frames, task samples, and prediction records.
// All types are immutable values after construction and safe to share
// across threads.

#include <array>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace drivelang {

inline constexpr double kPi = 3.14159265358979323846;

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Maps an angle onto (-pi, pi].
inline double normalize_yaw(double yaw) {
  if (!std::isfinite(yaw)) {
    throw ValidationError("yaw is not finite");
  }
  double y = std::fmod(yaw, 2.0 * kPi);
  if (y <= -kPi) {
    y += 2.0 * kPi;
  } else if (y > kPi) {
    y -= 2.0 * kPi;
  }
  return y;
}

// Axis-aligned box in image pixel coordinates, origin at the top-left.
struct Box2D {
  double x1{0.0};
  double y1{0.0};
  double x2{1.0};
  double y2{1.0};

  Box2D() = default;
  Box2D(double x1_, double y1_, double x2_, double y2_)
      : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
    if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
          std::isfinite(y2))) {
      throw ValidationError("box2d: coordinates must be finite");
    }
    if (x1 < 0.0 || y1 < 0.0) {
      throw ValidationError("box2d: coordinates must be >= 0");
    }
    if (!(x1 < x2) || !(y1 < y2)) {
      throw ValidationError("box2d: requires x1 < x2 and y1 < y2");
    }
  }

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const Box2D&) const = default;
};

// Oriented 3D box in the ego frame: center (m), size (m), yaw (rad).
// Yaw is normalized to (-pi, pi] on construction.
struct Box3D {
  double cx{0.0};
  double cy{0.0};
  double cz{0.0};
  double l{1.0};
  double w{1.0};
  double h{1.0};
  double yaw{0.0};

  Box3D() = default;
  Box3D(double cx_, double cy_, double cz_, double l_, double w_, double h_,
        double yaw_)
      : cx(cx_), cy(cy_), cz(cz_), l(l_), w(w_), h(h_) {
    if (!(std::isfinite(cx) && std::isfinite(cy) && std::isfinite(cz) &&
          std::isfinite(l) && std::isfinite(w) && std::isfinite(h))) {
      throw ValidationError("box3d: fields must be finite");
    }
    if (!(l > 0.0 && w > 0.0 && h > 0.0)) {
      throw ValidationError("box3d: sizes must be > 0");
    }
    yaw = normalize_yaw(yaw_);
  }

  double volume() const { return l * w * h; }

  bool operator==(const Box3D&) const = default;
};

// Closed category vocabulary. Defaults to the ten nuScenes detection classes.
class CategorySet {
 public:
  CategorySet() : CategorySet(nuscenes_names()) {}
  explicit CategorySet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) {
      throw ValidationError("category set must be nonempty");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) {
        throw ValidationError("category set contains an empty name");
      }
      for (std::size_t j = i + 1; j < names_.size(); ++j) {
        if (names_[i] == names_[j]) {
          throw ValidationError("duplicate category '" + names_[i] + "'");
        }
      }
    }
  }

  static const std::vector<std::string>& nuscenes_names() {
    static const std::vector<std::string> names = {
        "car",        "truck",      "bus",
        "trailer",    "construction_vehicle",
        "pedestrian", "motorcycle", "bicycle",
        "traffic_cone", "barrier"};
    return names;
  }

  bool contains(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

enum class SourceTag { GroundTruth, RegionToText, SegCaption };

inline std::string_view to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::GroundTruth: return "ground_truth";
    case SourceTag::RegionToText: return "region_to_text";
    case SourceTag::SegCaption: return "seg_caption";
  }
  throw ValidationError("invalid source tag");
}

inline SourceTag parse_source_tag(std::string_view s) {
  if (s == "ground_truth") return SourceTag::GroundTruth;
  if (s == "region_to_text") return SourceTag::RegionToText;
  if (s == "seg_caption") return SourceTag::SegCaption;
  throw ValidationError("unknown source tag '" + std::string(s) + "'");
}

// Lower value = higher priority when deduplicating overlapping boxes.
inline int source_priority(SourceTag tag) {
  switch (tag) {
    case SourceTag::GroundTruth: return 0;
    case SourceTag::RegionToText: return 1;
    case SourceTag::SegCaption: return 2;
  }
  throw ValidationError("invalid source tag");
}

enum class View { FrontLeft, Front, FrontRight, BackLeft, Back, BackRight };

inline constexpr std::size_t kNumViews = 6;

// Fixed surround order: front left, front, front right, back left, back,
// back right.
inline constexpr std::array<View, kNumViews> kViewOrder = {
    View::FrontLeft, View::Front, View::FrontRight,
    View::BackLeft,  View::Back,  View::BackRight};

inline std::string_view to_string(View v) {
  switch (v) {
    case View::FrontLeft: return "front_left";
    case View::Front: return "front";
    case View::FrontRight: return "front_right";
    case View::BackLeft: return "back_left";
    case View::Back: return "back";
    case View::BackRight: return "back_right";
  }
  throw ValidationError("invalid view");
}

// Human-readable form used inside prompt text ("front left", ...).
inline std::string view_phrase(View v) {
  std::string s(to_string(v));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

inline View parse_view(std::string_view s) {
  for (View v : kViewOrder) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown view '" + std::string(s) + "'");
}

enum class PlanningCommand { TurnLeft, TurnRight, GoStraight };

inline std::string_view to_string(PlanningCommand c) {
  switch (c) {
    case PlanningCommand::TurnLeft: return "turn_left";
    case PlanningCommand::TurnRight: return "turn_right";
    case PlanningCommand::GoStraight: return "go_straight";
  }
  throw ValidationError("invalid planning command");
}

inline std::string command_phrase(PlanningCommand c) {
  std::string s(to_string(c));
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}

inline PlanningCommand parse_planning_command(std::string_view s) {
  if (s == "turn_left") return PlanningCommand::TurnLeft;
  if (s == "turn_right") return PlanningCommand::TurnRight;
  if (s == "go_straight") return PlanningCommand::GoStraight;
  throw ValidationError("unknown planning command '" + std::string(s) + "'");
}

// One object reported by one source for one camera view.
struct ObjectRecord {
  std::string object_id;
  SourceTag source{SourceTag::GroundTruth};
  View view{View::Front};
  Box2D box2d;
  std::optional<Box3D> box3d;
  std::string category;
  std::string description;
  std::vector<std::string> attributes;
  std::optional<double> distance;
  std::optional<double> itm_score;

  void validate(const CategorySet& categories) const {
    if (object_id.empty()) {
      throw ValidationError("object record: object_id must be nonempty");
    }
    if (!categories.contains(category)) {
      throw ValidationError("object record '" + object_id +
                            "': category '" + category +
                            "' is not in the configured set");
    }
    if (source == SourceTag::GroundTruth) {
      if (!box3d.has_value()) {
        throw ValidationError("object record '" + object_id +
                              "': ground-truth records require box3d");
      }
      if (!distance.has_value()) {
        throw ValidationError("object record '" + object_id +
                              "': ground-truth records require distance");
      }
    } else if (!itm_score.has_value()) {
      throw ValidationError("object record '" + object_id +
                            "': non-ground-truth records require itm_score");
    }
    if (distance.has_value() &&
        (!std::isfinite(*distance) || *distance < 0.0)) {
      throw ValidationError("object record '" + object_id +
                            "': distance must be finite and >= 0");
    }
    if (itm_score.has_value() &&
        (!std::isfinite(*itm_score) || *itm_score < 0.0 || *itm_score > 1.0)) {
      throw ValidationError("object record '" + object_id +
                            "': itm_score must lie in [0, 1]");
    }
  }

  bool operator==(const ObjectRecord&) const = default;
};

// One timestamp of one scene: six camera image references plus the
// object records attached to them.
struct Frame {
  std::string scene_id;
  std::string frame_id;
  std::array<std::string, kNumViews> images;  // indexed by kViewOrder position
  std::vector<ObjectRecord> records;
  PlanningCommand planning_command{PlanningCommand::GoStraight};
  std::optional<std::string> caption;

  const std::string& image(View v) const {
    return images[static_cast<std::size_t>(v)];
  }

  void validate(const CategorySet& categories) const {
    if (scene_id.empty() || frame_id.empty()) {
      throw ValidationError("frame: scene_id and frame_id must be nonempty");
    }
    for (View v : kViewOrder) {
      if (image(v).empty()) {
        throw ValidationError("frame '" + frame_id + "': missing image for view '" +
                              std::string(to_string(v)) + "'");
      }
    }
    for (const ObjectRecord& r : records) {
      r.validate(categories);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      for (std::size_t j = i + 1; j < records.size(); ++j) {
        if (records[i].object_id == records[j].object_id) {
          throw ValidationError("frame '" + frame_id + "': duplicate object_id '" +
                                records[i].object_id + "'");
        }
      }
    }
  }

  bool operator==(const Frame&) const = default;
};

enum class TaskKind {
  DenseCaption,
  RegionDescription,
  VG2D,
  Prediction,
  Planning,
  VG3D
};

inline constexpr std::array<TaskKind, 6> kAllTasks = {
    TaskKind::DenseCaption, TaskKind::RegionDescription, TaskKind::VG2D,
    TaskKind::Prediction,   TaskKind::Planning,          TaskKind::VG3D};

inline std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::DenseCaption: return "dense_caption";
    case TaskKind::RegionDescription: return "region_description";
    case TaskKind::VG2D: return "vg2d";
    case TaskKind::Prediction: return "prediction";
    case TaskKind::Planning: return "planning";
    case TaskKind::VG3D: return "vg3d";
  }
  throw ValidationError("invalid task kind");
}

inline TaskKind parse_task_kind(std::string_view s) {
  for (TaskKind t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown task kind '" + std::string(s) + "'");
}

inline constexpr std::string_view kSurroundView = "surround";

// One generated image-language pair. `view` is a camera-view token or
// "surround". `category` is set for vg3d samples (the queried class).
struct TaskSample {
  std::string sample_id;
  TaskKind task{TaskKind::DenseCaption};
  std::string view{kSurroundView};
  std::optional<std::string> category;
  std::string prompt;
  std::string answer;
  std::vector<Box3D> target_boxes_3d;
  std::vector<Box2D> target_boxes_2d;

  void validate() const {
    if (sample_id.empty()) {
      throw ValidationError("task sample: sample_id must be nonempty");
    }
    if (prompt.empty() || answer.empty()) {
      throw ValidationError("task sample '" + sample_id +
                            "': prompt and answer must be nonempty");
    }
    if (view != kSurroundView) {
      parse_view(view);  // throws on unknown token
    }
    const bool want_3d = task == TaskKind::VG3D;
    if (want_3d != !target_boxes_3d.empty()) {
      throw ValidationError("task sample '" + sample_id +
                            "': target_boxes_3d must be nonempty iff task is vg3d");
    }
    const bool want_2d = task == TaskKind::VG2D;
    if (want_2d != !target_boxes_2d.empty()) {
      throw ValidationError("task sample '" + sample_id +
                            "': target_boxes_2d must be nonempty iff task is vg2d");
    }
  }

  bool operator==(const TaskSample&) const = default;
};

struct ScoredBox3D {
  Box3D box;
  std::string category;
  double confidence{1.0};

  bool operator==(const ScoredBox3D&) const = default;
};

struct ScoredBox2D {
  Box2D box;
  double confidence{1.0};

  bool operator==(const ScoredBox2D&) const = default;
};

// A model's output for one task sample.
struct Prediction {
  std::string sample_id;
  std::optional<std::string> text;
  std::vector<ScoredBox3D> boxes_3d;
  std::vector<ScoredBox2D> boxes_2d;

  void validate() const {
    if (sample_id.empty()) {
      throw ValidationError("prediction: sample_id must be nonempty");
    }
    for (const ScoredBox3D& b : boxes_3d) {
      if (!std::isfinite(b.confidence) || b.confidence < 0.0 || b.confidence > 1.0) {
        throw ValidationError("prediction '" + sample_id +
                              "': confidence must lie in [0, 1]");
      }
    }
    for (const ScoredBox2D& b : boxes_2d) {
      if (!std::isfinite(b.confidence) || b.confidence < 0.0 || b.confidence > 1.0) {
        throw ValidationError("prediction '" + sample_id +
                              "': confidence must lie in [0, 1]");
      }
    }
  }

  bool operator==(const Prediction&) const = default;
};

}  // namespace drivelang
