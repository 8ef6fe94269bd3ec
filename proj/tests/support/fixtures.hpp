#pragma once

// Deterministic synthetic fixtures shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "drivelang/pipeline.hpp"
#include "drivelang/types.hpp"

namespace drivelang::testing {

inline Box2D random_box2d(std::mt19937_64& rng, double image_w = 1600.0,
                          double image_h = 900.0, double min_size = 20.0) {
  std::uniform_real_distribution<double> ux(0.0, image_w - min_size);
  std::uniform_real_distribution<double> uy(0.0, image_h - min_size);
  const double x1 = ux(rng);
  const double y1 = uy(rng);
  std::uniform_real_distribution<double> uw(min_size, image_w - x1);
  std::uniform_real_distribution<double> uh(min_size, image_h - y1);
  return Box2D(x1, y1, x1 + uw(rng), y1 + uh(rng));
}

inline Box3D random_box3d(std::mt19937_64& rng, double span = 30.0) {
  std::uniform_real_distribution<double> uc(-span, span);
  std::uniform_real_distribution<double> uz(-1.0, 2.0);
  std::uniform_real_distribution<double> us(0.5, 5.0);
  std::uniform_real_distribution<double> uyaw(-kPi, kPi);
  return Box3D(uc(rng), uc(rng), uz(rng), us(rng), us(rng), us(rng), uyaw(rng));
}

inline const std::vector<std::string>& description_pool() {
  static const std::vector<std::string> pool = {
      "a silver sedan waiting at the crossing",
      "a large delivery truck parked by the curb",
      "a cyclist riding along the bike lane",
      "a pedestrian crossing the street with a bag",
      "an orange traffic cone on the road edge",
      "a city bus approaching the next stop",
      "a motorcycle weaving between the lanes",
      "a trailer attached to a heavy vehicle"};
  return pool;
}

inline const std::vector<std::string>& attribute_pool() {
  static const std::vector<std::string> pool = {
      "moving forward at a steady speed", "parked close to the road edge",
      "slowing down before the intersection", "standing still on the sidewalk",
      "accelerating away from the ego vehicle"};
  return pool;
}

struct FixtureOptions {
  std::size_t n_frames{100};
  std::uint64_t seed{20240811};
  bool with_captions{true};
  std::size_t min_records{2};
  std::size_t max_records{8};
  double overlap_probability{0.35};  // chance of an extra overlapping record
};

// Frames with mixed-source records, guaranteed-valid invariants, and
// deliberate cross-source overlaps so dedup has work to do.
inline std::vector<Frame> make_fixture_frames(const FixtureOptions& opts = {}) {
  std::mt19937_64 rng(opts.seed);
  const CategorySet categories;
  std::uniform_int_distribution<std::size_t> ucat(0, categories.size() - 1);
  std::uniform_int_distribution<std::size_t> uview(0, kNumViews - 1);
  std::uniform_int_distribution<int> usource(0, 9);
  std::uniform_int_distribution<std::size_t> udesc(0, description_pool().size() - 1);
  std::uniform_int_distribution<std::size_t> uattr(0, attribute_pool().size() - 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> ucmd(0, 2);
  std::uniform_int_distribution<std::size_t> urecords(opts.min_records,
                                                      opts.max_records);

  std::vector<Frame> frames;
  frames.reserve(opts.n_frames);
  for (std::size_t fi = 0; fi < opts.n_frames; ++fi) {
    Frame f;
    f.scene_id = "scene-" + std::to_string(fi / 10);
    char frame_id[32];
    std::snprintf(frame_id, sizeof(frame_id), "frame-%04zu", fi);
    f.frame_id = frame_id;
    for (std::size_t v = 0; v < kNumViews; ++v) {
      f.images[v] = f.frame_id + "/" + std::string(to_string(kViewOrder[v])) + ".jpg";
    }
    f.planning_command = static_cast<PlanningCommand>(ucmd(rng));

    const std::size_t n_records = urecords(rng);
    for (std::size_t ri = 0; ri < n_records; ++ri) {
      ObjectRecord r;
      r.object_id = f.frame_id + "-obj" + std::to_string(ri);
      const int roll = usource(rng);
      r.source = roll < 5   ? SourceTag::GroundTruth
                 : roll < 8 ? SourceTag::RegionToText
                            : SourceTag::SegCaption;
      r.view = kViewOrder[uview(rng)];
      r.box2d = random_box2d(rng);
      r.category = categories.names()[ucat(rng)];
      r.description = description_pool()[udesc(rng)];
      r.attributes = {attribute_pool()[uattr(rng)]};
      if (r.source == SourceTag::GroundTruth) {
        r.box3d = random_box3d(rng);
        r.distance = u01(rng) * 60.0;
      } else {
        r.itm_score = u01(rng);
      }
      f.records.push_back(r);

      // Occasionally add a lower-priority near-duplicate in the same view.
      if (u01(rng) < opts.overlap_probability) {
        ObjectRecord dup = r;
        dup.object_id = r.object_id + "-dup";
        dup.source = r.source == SourceTag::SegCaption ? SourceTag::RegionToText
                                                       : SourceTag::SegCaption;
        dup.box3d.reset();
        dup.distance.reset();
        dup.itm_score = u01(rng);
        const double jx = (u01(rng) - 0.5) * 0.1 * r.box2d.width();
        const double jy = (u01(rng) - 0.5) * 0.1 * r.box2d.height();
        dup.box2d = Box2D(std::max(0.0, r.box2d.x1 + jx), std::max(0.0, r.box2d.y1 + jy),
                          std::min(1600.0, r.box2d.x2 + jx),
                          std::min(900.0, r.box2d.y2 + jy));
        dup.description = description_pool()[udesc(rng)];
        f.records.push_back(dup);
      }
    }
    if (opts.with_captions) {
      std::string caption = "The scene around the ego vehicle shows";
      for (const ObjectRecord& r : f.records) {
        caption += " " + r.category + " in the " + view_phrase(r.view) + " view,";
      }
      caption += " under clear daylight conditions on a city road.";
      f.caption = caption;
    }
    f.validate(categories);
    frames.push_back(std::move(f));
  }
  return frames;
}

// Predictions that echo each sample's answer and target boxes, the
// "perfect model" used by end-to-end smoke checks.
inline std::vector<Prediction> predictions_from_answers(
    const std::vector<TaskSample>& samples) {
  std::vector<Prediction> preds;
  preds.reserve(samples.size());
  for (const TaskSample& s : samples) {
    Prediction p;
    p.sample_id = s.sample_id;
    p.text = s.answer;
    for (const Box3D& b : s.target_boxes_3d) {
      p.boxes_3d.push_back({b, s.category.value_or("unspecified"), 1.0});
    }
    for (const Box2D& b : s.target_boxes_2d) {
      p.boxes_2d.push_back({b, 1.0});
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace drivelang::testing
